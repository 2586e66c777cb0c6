#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "sharpose/rng.hpp"

namespace sharpose {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node;

// Dense f64 tensor, row-major, with optional gradient buffer and a link to
// the op record that produced it. Copies are shallow: they share data, grad
// and node. Tensors are treated as immutable once created; the only
// sanctioned in-place mutation is an explicit parameter update.
class Tensor {
 public:
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // same length as data when present
  std::shared_ptr<Node> node;
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(count(t.shape), 0.0);
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<double>>(t.data->size(), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false) {
    if (count(shape) != values.size()) throw ShapeError("Tensor::from: shape/data length mismatch");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad) t.grad = std::make_shared<std::vector<double>>(t.data->size(), 0.0);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : *t.data) v = rng.gaussian(0.0, stddev);
    return t;
  }

  std::size_t numel() const { return data ? data->size() : 0; }
  bool defined() const { return static_cast<bool>(data); }

  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape.size()); }

  int rows() const {
    if (shape.size() == 1) return 1;
    if (shape.size() == 2) return shape[0];
    throw ShapeError("Tensor::rows: not a matrix");
  }
  int cols() const {
    if (shape.size() == 1) return shape[0];
    if (shape.size() == 2) return shape[1];
    throw ShapeError("Tensor::cols: not a matrix");
  }

  double value() const {
    if (numel() != 1) throw ShapeError("Tensor::value: not a scalar");
    return (*data)[0];
  }

  double at(int r, int c) const { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }
  double& at(int r, int c) { return (*data)[static_cast<std::size_t>(r) * cols() + c]; }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  }

  // Deep copy of the values only; no graph, no grad.
  Tensor detached_copy() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(*data);
    return t;
  }

  // Shares the underlying values but owns a fresh zeroed gradient buffer.
  // Used to accumulate per-thread gradients against shared parameters.
  Tensor grad_sandbox() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    t.requires_grad = true;
    t.grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
    return t;
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
};

// Op record: holds the inputs (keeping them alive) and a closure that routes
// the output gradient into the inputs' gradient buffers.
struct Node {
  const char* op = "";
  std::vector<Tensor> parents;
  std::function<void()> backward;
};

struct ComputeGraph {
  std::vector<Node*> topo;  // parents before children
};

// Thread-local autograd switch; inference paths disable graph construction.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool is_grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EMat>;
using MutMap = Eigen::Map<EMat>;

inline ConstMap map(const Tensor& t) { return ConstMap(t.data->data(), t.rows(), t.cols()); }
inline MutMap map_mut(Tensor& t) { return MutMap(t.data->data(), t.rows(), t.cols()); }
inline ConstMap map_grad(const Tensor& t) { return ConstMap(t.grad->data(), t.rows(), t.cols()); }
// Buffers live behind shared_ptr, so gradient writes are fine through a
// const Tensor handle.
inline MutMap map_grad_mut(const Tensor& t) { return MutMap(t.grad->data(), t.rows(), t.cols()); }

inline void ensure_finite(const char* op, const Tensor& t) {
  for (double v : *t.data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value produced");
  }
}

inline bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->requires_grad) return true;
  }
  return false;
}

inline Tensor make_out(std::vector<int> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

inline void attach(Tensor& out, const char* op, std::vector<Tensor> parents, std::function<void()> backward) {
  if (!out.requires_grad) return;
  out.node = std::make_shared<Node>();
  out.node->op = op;
  out.node->parents = std::move(parents);
  out.node->backward = std::move(backward);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph traversal
// ---------------------------------------------------------------------------

// Topological order over the op records reachable from `root`, parents first.
inline ComputeGraph build_graph(const Tensor& root) {
  ComputeGraph g;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS; graphs are DAGs by construction (an op's
  // parents always predate it).
  std::vector<std::pair<Node*, std::size_t>> stack;
  auto push = [&](Node* n) {
    if (n && seen.insert(n).second) stack.emplace_back(n, 0);
  };
  push(root.node.get());
  while (!stack.empty()) {
    Node* n = stack.back().first;
    const std::size_t i = stack.back().second;
    if (i < n->parents.size()) {
      stack.back().second = i + 1;
      push(n->parents[i].node.get());
    } else {
      g.topo.push_back(n);
      stack.pop_back();
    }
  }
  return g;
}

// Seeds d(loss)/d(loss) = 1 and runs every op's backward exactly once.
// Gradients accumulate (+=) into existing buffers; the caller is responsible
// for zeroing them between optimization steps.
inline void run_backward(const ComputeGraph& graph, const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar");
  if (!loss.requires_grad) throw NumericError("backward: loss does not require grad");
  (*loss.grad)[0] += 1.0;
  for (auto it = graph.topo.rbegin(); it != graph.topo.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

inline void backward(const Tensor& loss) {
  ComputeGraph g = build_graph(loss);
  run_backward(g, loss);
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) throw ShapeError("matmul: shape mismatch");
  Tensor out = detail::make_out({a.rows(), b.cols()}, detail::any_grad({&a, &b}));
  detail::map_mut(out).noalias() = detail::map(a) * detail::map(b);
  detail::ensure_finite("matmul", out);
  detail::attach(out, "matmul", {a, b}, [a, b, out]() {
    // dA = dC * B^T, dB = A^T * dC
    if (a.requires_grad) detail::map_grad_mut(a).noalias() += detail::map_grad(out) * detail::map(b).transpose();
    if (b.requires_grad) detail::map_grad_mut(b).noalias() += detail::map(a).transpose() * detail::map_grad(out);
  });
  return out;
}

// C = A * B^T for row-major B of shape [n x k]; avoids materializing transposes.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) throw ShapeError("matmul_nt: shape mismatch");
  Tensor out = detail::make_out({a.rows(), b.rows()}, detail::any_grad({&a, &b}));
  detail::map_mut(out).noalias() = detail::map(a) * detail::map(b).transpose();
  detail::ensure_finite("matmul_nt", out);
  detail::attach(out, "matmul_nt", {a, b}, [a, b, out]() {
    if (a.requires_grad) detail::map_grad_mut(a).noalias() += detail::map_grad(out) * detail::map(b);
    if (b.requires_grad) detail::map_grad_mut(b).noalias() += detail::map_grad(out).transpose() * detail::map(a);
  });
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) throw ShapeError("add: shape mismatch");
  Tensor out = detail::make_out(a.shape, detail::any_grad({&a, &b}));
  const double* pa = a.data->data();
  const double* pb = b.data->data();
  double* po = out.data->data();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  detail::ensure_finite("add", out);
  detail::attach(out, "add", {a, b}, [a, b, out]() {
    const double* g = out.grad->data();
    const std::size_t m = out.numel();
    if (a.requires_grad) {
      double* ga = a.grad->data();
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
    }
    if (b.requires_grad) {
      double* gb = b.grad->data();
      for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
    }
  });
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) throw ShapeError("sub: shape mismatch");
  Tensor out = detail::make_out(a.shape, detail::any_grad({&a, &b}));
  const double* pa = a.data->data();
  const double* pb = b.data->data();
  double* po = out.data->data();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  detail::ensure_finite("sub", out);
  detail::attach(out, "sub", {a, b}, [a, b, out]() {
    const double* g = out.grad->data();
    const std::size_t m = out.numel();
    if (a.requires_grad) {
      double* ga = a.grad->data();
      for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
    }
    if (b.requires_grad) {
      double* gb = b.grad->data();
      for (std::size_t i = 0; i < m; ++i) gb[i] -= g[i];
    }
  });
  return out;
}

// a[m x n] + v broadcast over rows; v has n entries ([n] or [1 x n]).
inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (a.ndim() != 2 || v.numel() != static_cast<std::size_t>(a.cols())) throw ShapeError("add_rowvec: shape mismatch");
  Tensor out = detail::make_out(a.shape, detail::any_grad({&a, &v}));
  const int m = a.rows(), n = a.cols();
  const double* pa = a.data->data();
  const double* pv = v.data->data();
  double* po = out.data->data();
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) po[r * n + c] = pa[r * n + c] + pv[c];
  }
  detail::ensure_finite("add_rowvec", out);
  detail::attach(out, "add_rowvec", {a, v}, [a, v, out, m, n]() {
    const double* g = out.grad->data();
    if (a.requires_grad) {
      double* ga = a.grad->data();
      for (int i = 0; i < m * n; ++i) ga[i] += g[i];
    }
    if (v.requires_grad) {
      double* gv = v.grad->data();
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) gv[c] += g[r * n + c];
      }
    }
  });
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out = detail::make_out(a.shape, a.requires_grad);
  const double* pa = a.data->data();
  double* po = out.data->data();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * s;
  detail::ensure_finite("scale", out);
  detail::attach(out, "scale", {a}, [a, out, s]() {
    const double* g = out.grad->data();
    double* ga = a.grad->data();
    const std::size_t m = out.numel();
    for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * s;
  });
  return out;
}

inline Tensor square(const Tensor& a) {
  Tensor out = detail::make_out(a.shape, a.requires_grad);
  const double* pa = a.data->data();
  double* po = out.data->data();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pa[i];
  detail::ensure_finite("square", out);
  detail::attach(out, "square", {a}, [a, out]() {
    const double* g = out.grad->data();
    const double* pa2 = a.data->data();
    double* ga = a.grad->data();
    const std::size_t m = out.numel();
    for (std::size_t i = 0; i < m; ++i) ga[i] += 2.0 * pa2[i] * g[i];
  });
  return out;
}

inline Tensor sum_all(const Tensor& a) {
  Tensor out = detail::make_out({1}, a.requires_grad);
  double s = 0.0;
  for (double v : *a.data) s += v;
  (*out.data)[0] = s;
  detail::ensure_finite("sum_all", out);
  detail::attach(out, "sum_all", {a}, [a, out]() {
    const double g = (*out.grad)[0];
    double* ga = a.grad->data();
    const std::size_t m = a.numel();
    for (std::size_t i = 0; i < m; ++i) ga[i] += g;
  });
  return out;
}

inline Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  Tensor out = detail::make_out({1}, a.requires_grad);
  double s = 0.0;
  for (double v : *a.data) s += v;
  (*out.data)[0] = s * inv;
  detail::ensure_finite("mean_all", out);
  detail::attach(out, "mean_all", {a}, [a, out, inv]() {
    const double g = (*out.grad)[0] * inv;
    double* ga = a.grad->data();
    const std::size_t m = a.numel();
    for (std::size_t i = 0; i < m; ++i) ga[i] += g;
  });
  return out;
}

// Row-wise softmax with row-max subtraction, so |x| up to ~1e4 cannot overflow.
inline Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("softmax_rows: expected matrix");
  Tensor out = detail::make_out(x.shape, x.requires_grad);
  const int m = x.rows(), n = x.cols();
  const double* px = x.data->data();
  double* po = out.data->data();
  for (int r = 0; r < m; ++r) {
    const double* row = px + static_cast<std::size_t>(r) * n;
    double* orow = po + static_cast<std::size_t>(r) * n;
    double mx = row[0];
    for (int c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (int c = 0; c < n; ++c) {
      orow[c] = std::exp(row[c] - mx);
      s += orow[c];
    }
    const double inv = 1.0 / s;
    for (int c = 0; c < n; ++c) orow[c] *= inv;
  }
  detail::ensure_finite("softmax_rows", out);
  detail::attach(out, "softmax_rows", {x}, [x, out, m, n]() {
    // dx_i = y_i * (g_i - sum_j g_j y_j) per row
    const double* y = out.data->data();
    const double* g = out.grad->data();
    double* gx = x.grad->data();
    for (int r = 0; r < m; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * n;
      double dot = 0.0;
      for (int c = 0; c < n; ++c) dot += g[off + c] * y[off + c];
      for (int c = 0; c < n; ++c) gx[off + c] += y[off + c] * (g[off + c] - dot);
    }
  });
  return out;
}

// Per-row normalization over the last dimension followed by the affine
// (gamma, beta). Population variance, eps inside the sqrt.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6) {
  if (x.ndim() != 2) throw ShapeError("layer_norm: expected matrix");
  const int m = x.rows(), d = x.cols();
  if (gamma.numel() != static_cast<std::size_t>(d) || beta.numel() != static_cast<std::size_t>(d)) {
    throw ShapeError("layer_norm: affine shape mismatch");
  }
  Tensor out = detail::make_out(x.shape, detail::any_grad({&x, &gamma, &beta}));
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  const double* px = x.data->data();
  const double* pg = gamma.data->data();
  const double* pb = beta.data->data();
  double* po = out.data->data();
  for (int r = 0; r < m; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += px[off + c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      const double t = px[off + c] - mean;
      var += t * t;
    }
    var /= d;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (int c = 0; c < d; ++c) {
      const double h = (px[off + c] - mean) * istd;
      (*xhat)[off + c] = h;
      po[off + c] = h * pg[c] + pb[c];
    }
  }
  detail::ensure_finite("layer_norm", out);
  detail::attach(out, "layer_norm", {x, gamma, beta}, [x, gamma, beta, out, xhat, inv_std, m, d]() {
    const double* g = out.grad->data();
    const double* pg2 = gamma.data->data();
    const double* ph = xhat->data();
    for (int r = 0; r < m; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * d;
      if (gamma.requires_grad) {
        double* gg = gamma.grad->data();
        for (int c = 0; c < d; ++c) gg[c] += g[off + c] * ph[off + c];
      }
      if (beta.requires_grad) {
        double* gb = beta.grad->data();
        for (int c = 0; c < d; ++c) gb[c] += g[off + c];
      }
      if (x.requires_grad) {
        double* gx = x.grad->data();
        double mean_gy = 0.0, mean_gyh = 0.0;
        for (int c = 0; c < d; ++c) {
          const double gy = g[off + c] * pg2[c];
          mean_gy += gy;
          mean_gyh += gy * ph[off + c];
        }
        mean_gy /= d;
        mean_gyh /= d;
        const double istd = (*inv_std)[r];
        for (int c = 0; c < d; ++c) {
          const double gy = g[off + c] * pg2[c];
          gx[off + c] += (gy - mean_gy - ph[off + c] * mean_gyh) * istd;
        }
      }
    }
  });
  return out;
}

namespace detail {
// tanh-approximation GELU constants: sqrt(2/pi) and the cubic coefficient.
constexpr double kGeluRoot2OverPi = 0.7978845608028653558798921198687;
constexpr double kGeluCubic = 0.044715;
}  // namespace detail

// gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
inline Tensor gelu(const Tensor& x) {
  Tensor out = detail::make_out(x.shape, x.requires_grad);
  auto tanh_cache = std::make_shared<std::vector<double>>(x.numel());
  const double* px = x.data->data();
  double* po = out.data->data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    const double t = std::tanh(detail::kGeluRoot2OverPi * (v + detail::kGeluCubic * v * v * v));
    (*tanh_cache)[i] = t;
    po[i] = 0.5 * v * (1.0 + t);
  }
  detail::ensure_finite("gelu", out);
  detail::attach(out, "gelu", {x}, [x, out, tanh_cache]() {
    const double* px2 = x.data->data();
    const double* g = out.grad->data();
    double* gx = x.grad->data();
    const std::size_t m = x.numel();
    for (std::size_t i = 0; i < m; ++i) {
      const double v = px2[i];
      const double t = (*tanh_cache)[i];
      const double du = detail::kGeluRoot2OverPi * (1.0 + 3.0 * detail::kGeluCubic * v * v);
      const double dy = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      gx[i] += g[i] * dy;
    }
  });
  return out;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor out = detail::make_out(x.shape, x.requires_grad);
  const double* px = x.data->data();
  double* po = out.data->data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    po[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  detail::ensure_finite("sigmoid", out);
  detail::attach(out, "sigmoid", {x}, [x, out]() {
    const double* y = out.data->data();
    const double* g = out.grad->data();
    double* gx = x.grad->data();
    const std::size_t m = x.numel();
    for (std::size_t i = 0; i < m; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

// |a - target| for a scalar tensor; subgradient 0 at equality.
inline Tensor abs_diff(const Tensor& a, double target) {
  if (a.numel() != 1) throw ShapeError("abs_diff: expected scalar");
  Tensor out = detail::make_out({1}, a.requires_grad);
  const double diff = (*a.data)[0] - target;
  (*out.data)[0] = std::abs(diff);
  detail::ensure_finite("abs_diff", out);
  detail::attach(out, "abs_diff", {a}, [a, out, diff]() {
    const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    (*a.grad)[0] += (*out.grad)[0] * s;
  });
  return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  const int n = parts[0].cols();
  int m = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.cols() != n) throw ShapeError("concat_rows: column mismatch");
    m += p.rows();
    rg = rg || p.requires_grad;
  }
  Tensor out = detail::make_out({m, n}, rg);
  double* po = out.data->data();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data->begin(), p.data->end(), po + off);
    off += p.numel();
  }
  detail::attach(out, "concat_rows", parts, [parts, out]() {
    const double* g = out.grad->data();
    std::size_t o = 0;
    for (const Tensor& p : parts) {
      if (p.requires_grad) {
        double* gp = p.grad->data();
        const std::size_t k = p.numel();
        for (std::size_t i = 0; i < k; ++i) gp[i] += g[o + i];
      }
      o += p.numel();
    }
  });
  return out;
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
  if (x.ndim() != 2 || r0 < 0 || r1 > x.rows() || r0 >= r1) throw ShapeError("slice_rows: bad range");
  const int n = x.cols();
  Tensor out = detail::make_out({r1 - r0, n}, x.requires_grad);
  std::copy(x.data->begin() + static_cast<std::size_t>(r0) * n, x.data->begin() + static_cast<std::size_t>(r1) * n,
            out.data->begin());
  detail::attach(out, "slice_rows", {x}, [x, out, r0, n]() {
    const double* g = out.grad->data();
    double* gx = x.grad->data() + static_cast<std::size_t>(r0) * n;
    const std::size_t k = out.numel();
    for (std::size_t i = 0; i < k; ++i) gx[i] += g[i];
  });
  return out;
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
  if (x.ndim() != 2 || c0 < 0 || c1 > x.cols() || c0 >= c1) throw ShapeError("slice_cols: bad range");
  const int m = x.rows(), n = x.cols(), w = c1 - c0;
  Tensor out = detail::make_out({m, w}, x.requires_grad);
  const double* px = x.data->data();
  double* po = out.data->data();
  for (int r = 0; r < m; ++r) {
    std::copy(px + static_cast<std::size_t>(r) * n + c0, px + static_cast<std::size_t>(r) * n + c1,
              po + static_cast<std::size_t>(r) * w);
  }
  detail::attach(out, "slice_cols", {x}, [x, out, c0, m, n, w]() {
    const double* g = out.grad->data();
    double* gx = x.grad->data();
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < w; ++c) gx[static_cast<std::size_t>(r) * n + c0 + c] += g[static_cast<std::size_t>(r) * w + c];
    }
  });
  return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  const int m = parts[0].rows();
  int n = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.rows() != m) throw ShapeError("concat_cols: row mismatch");
    n += p.cols();
    rg = rg || p.requires_grad;
  }
  Tensor out = detail::make_out({m, n}, rg);
  double* po = out.data->data();
  int coff = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    const double* pp = p.data->data();
    for (int r = 0; r < m; ++r) {
      std::copy(pp + static_cast<std::size_t>(r) * w, pp + static_cast<std::size_t>(r) * w + w,
                po + static_cast<std::size_t>(r) * n + coff);
    }
    coff += w;
  }
  detail::attach(out, "concat_cols", parts, [parts, out, m, n]() {
    const double* g = out.grad->data();
    int co = 0;
    for (const Tensor& p : parts) {
      const int w = p.cols();
      if (p.requires_grad) {
        double* gp = p.grad->data();
        for (int r = 0; r < m; ++r) {
          for (int c = 0; c < w; ++c) gp[static_cast<std::size_t>(r) * w + c] += g[static_cast<std::size_t>(r) * n + co + c];
        }
      }
      co += w;
    }
  });
  return out;
}

// out row i = x row idx[i]; indices may repeat. Backward scatter-adds.
inline Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  if (x.ndim() != 2) throw ShapeError("gather_rows: expected matrix");
  const int m = x.rows(), n = x.cols();
  for (int i : idx) {
    if (i < 0 || i >= m) throw ShapeError("gather_rows: index out of range");
  }
  Tensor out = detail::make_out({static_cast<int>(idx.size()), n}, x.requires_grad);
  const double* px = x.data->data();
  double* po = out.data->data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(px + static_cast<std::size_t>(idx[r]) * n, px + static_cast<std::size_t>(idx[r]) * n + n, po + r * n);
  }
  detail::attach(out, "gather_rows", {x}, [x, out, idx, n]() {
    const double* g = out.grad->data();
    double* gx = x.grad->data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (int c = 0; c < n; ++c) gx[static_cast<std::size_t>(idx[r]) * n + c] += g[r * n + c];
    }
  });
  return out;
}

// Mean squared error against a constant target (no gradient into target).
inline Tensor mse_against(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) throw ShapeError("mse_against: shape mismatch");
  Tensor t = target;
  t.requires_grad = false;
  t.grad.reset();
  t.node.reset();
  return mean_all(square(sub(pred, t)));
}

}  // namespace sharpose
