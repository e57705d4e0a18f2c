#include "f2s/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace f2s {

void require_finite(std::span<const double> v, const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw DataError(what + ": non-finite value " + std::to_string(v[i]) + " at index " +
                      std::to_string(i));
    }
  }
}

void require_finite(const Tensor1& t, const std::string& what) { require_finite(t.span(), what); }

void require_finite(const Tensor2& t, const std::string& what) {
  require_finite(std::span<const double>(t.values()), what);
}

Tensor1 linear_forward(const Tensor1& x, const Tensor2& W, const Tensor1& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw ConfigError("linear_forward: W is " + std::to_string(W.rows()) + "x" +
                      std::to_string(W.cols()) + " but x has length " + std::to_string(x.size()) +
                      " and b has length " + std::to_string(b.size()));
  }
  Tensor1 out(W.rows());
  for (std::size_t i = 0; i < W.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < W.cols(); ++j) {
      acc += W.at(i, j) * x[j];
    }
    out[i] = acc + b[i];
  }
  return out;
}

Tensor1 softmax(const Tensor1& v) {
  if (v.size() == 0) {
    throw ConfigError("softmax: empty input");
  }
  double m = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) m = std::max(m, v[i]);
  Tensor1 out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    z += out[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] /= z;
  return out;
}

Tensor1 sigmoid(const Tensor1& v) {
  Tensor1 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  return out;
}

Tensor1 relu(const Tensor1& v) {
  Tensor1 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

double mse(const Tensor1& a, const Tensor1& b) {
  if (a.size() != b.size()) {
    throw ConfigError("mse: length mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  if (a.size() == 0) {
    throw ConfigError("mse: empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double dot(const Tensor1& a, const Tensor1& b) {
  if (a.size() != b.size()) {
    throw ConfigError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Tensor1 concat(std::span<const Tensor1* const> parts) {
  std::size_t n = 0;
  for (const Tensor1* p : parts) n += p->size();
  Tensor1 out(n);
  std::size_t k = 0;
  for (const Tensor1* p : parts) {
    for (std::size_t i = 0; i < p->size(); ++i) out[k++] = (*p)[i];
  }
  return out;
}

Tensor1 concat(const Tensor1& a, const Tensor1& b) {
  const Tensor1* parts[] = {&a, &b};
  return concat(std::span<const Tensor1* const>(parts));
}

void quantize_f32(Tensor1& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = quantize_f32(t[i]);
}

void quantize_f32(Tensor2& t) {
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) t.at(i, j) = quantize_f32(t.at(i, j));
}

}  // namespace f2s
