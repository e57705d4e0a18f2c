#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "f2s/error.hpp"

namespace f2s {

// Dense 1-d value vector. Entries are doubles; serialized forms are 32-bit.
// Shape is fixed at construction.
class Tensor1 {
 public:
  Tensor1() = default;
  explicit Tensor1(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  explicit Tensor1(std::vector<double> v) : v_(std::move(v)) {}
  Tensor1(std::initializer_list<double> xs) : v_(xs) {}

  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  const std::vector<double>& values() const { return v_; }
  std::span<const double> span() const { return v_; }

  bool operator==(const Tensor1&) const = default;

 private:
  std::vector<double> v_;
};

// Dense row-major matrix.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  double& at(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  const std::vector<double>& values() const { return v_; }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

// Throws DataError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> v, const std::string& what);
void require_finite(const Tensor1& t, const std::string& what);
void require_finite(const Tensor2& t, const std::string& what);

// out[i] = sum_j W[i][j] * x[j] + b[i], accumulated in double.
Tensor1 linear_forward(const Tensor1& x, const Tensor2& W, const Tensor1& b);

// Numerically stable softmax (max subtraction); output sums to 1.
Tensor1 softmax(const Tensor1& v);

// Elementwise 1 / (1 + e^-x).
Tensor1 sigmoid(const Tensor1& v);

Tensor1 relu(const Tensor1& v);

// (1/n) * sum (a[i] - b[i])^2.
double mse(const Tensor1& a, const Tensor1& b);

double dot(const Tensor1& a, const Tensor1& b);

Tensor1 concat(std::span<const Tensor1* const> parts);
Tensor1 concat(const Tensor1& a, const Tensor1& b);

// Round-trip through IEEE-754 binary32 (the serialization precision).
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }
void quantize_f32(Tensor1& t);
void quantize_f32(Tensor2& t);

}  // namespace f2s
