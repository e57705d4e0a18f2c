#include "f2s/tape.hpp"

#include <algorithm>
#include <cmath>

namespace f2s {

GradTape::Value GradTape::push(std::vector<double> val) {
  Node n;
  n.grad.assign(val.size(), 0.0);
  n.val = std::move(val);
  nodes_.push_back(std::move(n));
  return Value{nodes_.size() - 1, nodes_.back().val.size()};
}

void GradTape::check_size(Value a, Value b, const char* op) const {
  if (a.size != b.size) {
    throw InternalError(std::string(op) + ": size mismatch " + std::to_string(a.size) + " vs " +
                        std::to_string(b.size));
  }
}

GradTape::Value GradTape::input(std::span<const double> x) {
  return push(std::vector<double>(x.begin(), x.end()));
}

GradTape::Value GradTape::input_scalar(double x) { return push({x}); }

GradTape::Value GradTape::param(const std::string& name, const Tensor1& v) {
  if (params_.count(name)) throw InternalError("tape: duplicate parameter " + name);
  Value out = push(v.values());
  params_[name] = out.node;
  return out;
}

GradTape::Value GradTape::param(const std::string& name, const Tensor2& W) {
  if (params_.count(name)) throw InternalError("tape: duplicate parameter " + name);
  Value out = push(W.values());
  nodes_[out.node].rows = W.rows();
  nodes_[out.node].cols = W.cols();
  params_[name] = out.node;
  return out;
}

GradTape::Value GradTape::linear(Value W, Value b, Value x) {
  const std::size_t rows = nodes_[W.node].rows;
  const std::size_t cols = nodes_[W.node].cols;
  if (rows == 0 || rows * cols != W.size) {
    throw InternalError("tape linear: W is not a matrix parameter");
  }
  if (cols != x.size || rows != b.size) {
    throw InternalError("tape linear: shape mismatch (" + std::to_string(rows) + "x" +
                        std::to_string(cols) + ") * " + std::to_string(x.size) + " + " +
                        std::to_string(b.size));
  }
  // Same loop as linear_forward so taped and eager values match bitwise.
  std::vector<double> out(rows);
  const auto& w = v(W.node);
  const auto& xv = v(x.node);
  const auto& bv = v(b.node);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += w[i * cols + j] * xv[j];
    out[i] = acc + bv[i];
  }
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, W, b, x, y, rows, cols] {
    const auto& gy = g(y.node);
    const auto& w = v(W.node);
    const auto& xv = v(x.node);
    auto& gw = g(W.node);
    auto& gb = g(b.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < rows; ++i) {
      gb[i] += gy[i];
      for (std::size_t j = 0; j < cols; ++j) {
        gw[i * cols + j] += gy[i] * xv[j];
        gx[j] += gy[i] * w[i * cols + j];
      }
    }
  };
  return y;
}

GradTape::Value GradTape::relu(Value x) {
  std::vector<double> out(x.size);
  const auto& xv = v(x.node);
  for (std::size_t i = 0; i < x.size; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y] {
    const auto& gy = g(y.node);
    const auto& xv = v(x.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += gy[i];
    }
  };
  return y;
}

GradTape::Value GradTape::softmax(Value x) {
  if (x.size == 0) throw InternalError("tape softmax: empty input");
  // Mirrors the eager softmax kernel exactly.
  const auto& xv = v(x.node);
  double m = xv[0];
  for (std::size_t i = 1; i < xv.size(); ++i) m = std::max(m, xv[i]);
  std::vector<double> out(x.size);
  double z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = std::exp(xv[i] - m);
    z += out[i];
  }
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] /= z;
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y] {
    const auto& gy = g(y.node);
    const auto& yv = v(y.node);
    auto& gx = g(x.node);
    double s = 0.0;
    for (std::size_t i = 0; i < yv.size(); ++i) s += gy[i] * yv[i];
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += yv[i] * (gy[i] - s);
  };
  return y;
}

GradTape::Value GradTape::sigmoid(Value x) {
  std::vector<double> out(x.size);
  const auto& xv = v(x.node);
  for (std::size_t i = 0; i < x.size; ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y] {
    const auto& gy = g(y.node);
    const auto& yv = v(y.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  };
  return y;
}

GradTape::Value GradTape::add_scalar(Value x, double c) {
  std::vector<double> out(x.size);
  const auto& xv = v(x.node);
  for (std::size_t i = 0; i < x.size; ++i) out[i] = xv[i] + c;
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y] {
    const auto& gy = g(y.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  };
  return y;
}

GradTape::Value GradTape::scale(Value x, double c) {
  std::vector<double> out(x.size);
  const auto& xv = v(x.node);
  for (std::size_t i = 0; i < x.size; ++i) out[i] = xv[i] * c;
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y, c] {
    const auto& gy = g(y.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * c;
  };
  return y;
}

GradTape::Value GradTape::concat(std::span<const Value> parts) {
  std::size_t n = 0;
  for (const Value& p : parts) n += p.size;
  std::vector<double> out;
  out.reserve(n);
  for (const Value& p : parts) {
    const auto& pv = v(p.node);
    out.insert(out.end(), pv.begin(), pv.end());
  }
  Value y = push(std::move(out));
  std::vector<Value> kept(parts.begin(), parts.end());
  nodes_[y.node].back = [this, kept = std::move(kept), y] {
    const auto& gy = g(y.node);
    std::size_t k = 0;
    for (const Value& p : kept) {
      auto& gp = g(p.node);
      for (std::size_t i = 0; i < p.size; ++i) gp[i] += gy[k++];
    }
  };
  return y;
}

GradTape::Value GradTape::element(Value x, std::size_t i) {
  if (i >= x.size) throw InternalError("tape element: index out of range");
  Value y = push({v(x.node)[i]});
  nodes_[y.node].back = [this, x, y, i] { g(x.node)[i] += g(y.node)[0]; };
  return y;
}

GradTape::Value GradTape::add(Value a, Value b) {
  check_size(a, b, "tape add");
  std::vector<double> out(a.size);
  const auto& av = v(a.node);
  const auto& bv = v(b.node);
  for (std::size_t i = 0; i < a.size; ++i) out[i] = av[i] + bv[i];
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, a, b, y] {
    const auto& gy = g(y.node);
    auto& ga = g(a.node);
    auto& gb = g(b.node);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  };
  return y;
}

GradTape::Value GradTape::sub(Value a, Value b) {
  check_size(a, b, "tape sub");
  std::vector<double> out(a.size);
  const auto& av = v(a.node);
  const auto& bv = v(b.node);
  for (std::size_t i = 0; i < a.size; ++i) out[i] = av[i] - bv[i];
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, a, b, y] {
    const auto& gy = g(y.node);
    auto& ga = g(a.node);
    auto& gb = g(b.node);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  };
  return y;
}

GradTape::Value GradTape::mul(Value a, Value b) {
  check_size(a, b, "tape mul");
  std::vector<double> out(a.size);
  const auto& av = v(a.node);
  const auto& bv = v(b.node);
  for (std::size_t i = 0; i < a.size; ++i) out[i] = av[i] * bv[i];
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, a, b, y] {
    const auto& gy = g(y.node);
    const auto& av = v(a.node);
    const auto& bv = v(b.node);
    auto& ga = g(a.node);
    auto& gb = g(b.node);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * bv[i];
      gb[i] += gy[i] * av[i];
    }
  };
  return y;
}

GradTape::Value GradTape::square(Value x) {
  std::vector<double> out(x.size);
  const auto& xv = v(x.node);
  for (std::size_t i = 0; i < x.size; ++i) out[i] = xv[i] * xv[i];
  Value y = push(std::move(out));
  nodes_[y.node].back = [this, x, y] {
    const auto& gy = g(y.node);
    const auto& xv = v(x.node);
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += 2.0 * xv[i] * gy[i];
  };
  return y;
}

GradTape::Value GradTape::sum(Value x) {
  const auto& xv = v(x.node);
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  Value y = push({acc});
  nodes_[y.node].back = [this, x, y] {
    const double gy = g(y.node)[0];
    auto& gx = g(x.node);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy;
  };
  return y;
}

GradTape::Value GradTape::dot(Value a, Value b) {
  check_size(a, b, "tape dot");
  // Same accumulation order as the eager dot kernel.
  const auto& av = v(a.node);
  const auto& bv = v(b.node);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Value y = push({acc});
  nodes_[y.node].back = [this, a, b, y] {
    const double gy = g(y.node)[0];
    const auto& av = v(a.node);
    const auto& bv = v(b.node);
    auto& ga = g(a.node);
    auto& gb = g(b.node);
    for (std::size_t i = 0; i < av.size(); ++i) {
      ga[i] += gy * bv[i];
      gb[i] += gy * av[i];
    }
  };
  return y;
}

GradTape::Value GradTape::stop_grad(Value x) {
  return push(std::vector<double>(v(x.node)));
}

void GradTape::backward(Value loss) {
  if (loss.size != 1) throw InternalError("tape backward: loss must be a scalar node");
  if (ran_backward_) throw InternalError("tape backward: tape already consumed");
  ran_backward_ = true;
  nodes_[loss.node].grad[0] = 1.0;
  for (std::size_t i = loss.node + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back();
  }
}

const std::vector<double>& GradTape::value(Value v) const { return nodes_[v.node].val; }

double GradTape::scalar(Value v) const {
  if (v.size != 1) throw InternalError("tape scalar: node is not a scalar");
  return nodes_[v.node].val[0];
}

bool GradTape::has_param(const std::string& name) const { return params_.count(name) != 0; }

const std::vector<double>& GradTape::grad(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InternalError("tape grad: unknown parameter " + name);
  return nodes_[it->second].grad;
}

std::vector<std::string> GradTape::param_names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, idx] : params_) out.push_back(name);
  return out;
}

}  // namespace f2s
