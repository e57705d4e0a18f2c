#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "f2s/tensor.hpp"

namespace f2s {

// Single-use reverse-mode tape over vector-valued nodes (a scalar is a
// size-1 node). Ops record a backward closure at creation; backward() runs
// the closures in exact reverse creation order, so gradients are
// reproducible bit for bit across runs.
//
// Taped forwards replicate the eager kernels in tensor.hpp operation for
// operation, so a taped forward pass produces bit-identical values to the
// eager path (this is asserted by tests).
class GradTape {
 public:
  // Handle into the tape. Cheap to copy; valid for the tape's lifetime.
  struct Value {
    std::size_t node = 0;
    std::size_t size = 0;
  };

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Leaves. Inputs are constants; params are named and collect gradients.
  // Registering the same parameter name twice on one tape is an error.
  Value input(std::span<const double> x);
  Value input(const Tensor1& x) { return input(x.span()); }
  Value input_scalar(double x);
  Value param(const std::string& name, const Tensor1& v);
  Value param(const std::string& name, const Tensor2& W);

  // y = W x + b. W must be a matrix parameter; shapes are checked.
  Value linear(Value W, Value b, Value x);
  Value relu(Value v);
  Value softmax(Value v);
  Value sigmoid(Value v);
  // Elementwise v + c / v * c.
  Value add_scalar(Value v, double c);
  Value scale(Value v, double c);
  Value concat(std::span<const Value> parts);
  // Size-1 node holding v[i].
  Value element(Value v, std::size_t i);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value square(Value v);
  Value sum(Value v);
  Value dot(Value a, Value b);
  // Value copy; gradient does not flow past it.
  Value stop_grad(Value v);

  // Seeds d(loss)/d(loss) = 1 and runs all backward closures. The loss must
  // be a scalar node. May be called once per tape.
  void backward(Value loss);

  const std::vector<double>& value(Value v) const;
  double scalar(Value v) const;

  bool has_param(const std::string& name) const;
  // Gradient of the last backward() w.r.t. the named parameter, flattened
  // row-major for matrices. Throws InternalError for unknown names.
  const std::vector<double>& grad(const std::string& name) const;
  std::vector<std::string> param_names() const;

 private:
  struct Node {
    std::vector<double> val;
    std::vector<double> grad;          // same length as val, zero until backward
    std::size_t rows = 0, cols = 0;    // set for matrix params only
    std::function<void()> back;        // empty for leaves
  };

  Value push(std::vector<double> val);
  std::vector<double>& g(std::size_t node) { return nodes_[node].grad; }
  const std::vector<double>& v(std::size_t node) const { return nodes_[node].val; }
  void check_size(Value a, Value b, const char* op) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;  // name -> node index
  bool ran_backward_ = false;
};

}  // namespace f2s
