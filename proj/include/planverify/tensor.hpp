#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "planverify/errors.hpp"
#include "planverify/rng.hpp"

namespace planverify::nn {

/// Dense row-major tensor node with reverse-mode autodiff. Rank is 1 or 2;
/// scalars are rank-1 tensors of size 1. Gradients accumulate into `grad`
/// until explicitly cleared.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    auto n = std::make_shared<TensorNode>();
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    n->shape = std::move(shape);
    n->value.assign(total, 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values,
                            bool requires_grad = false) {
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    if (total != values.size()) throw ShapeMismatch("from_values: data length does not match shape");
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  /// [rows, cols] matrix view of a flat vector of row vectors.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return from_values({rows, cols}, std::move(values), requires_grad);
  }

  bool valid() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->size(); }
  std::size_t rows() const { return rank() == 2 ? node_->shape[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? node_->shape[1] : node_->shape[0]; }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  double item() const {
    if (size() != 1) throw NotScalar("item() on tensor of size " + std::to_string(size()));
    return node_->value[0];
  }

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline bool wants_grad(const Tensor& t) {
  return t.node()->requires_grad || !t.node()->parents.empty();
}

inline Tensor make_op(std::vector<std::size_t> shape, std::vector<double> value,
                      std::vector<Tensor> inputs,
                      std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool track = false;
  for (const auto& in : inputs) track = track || wants_grad(in);
  if (track) {
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward_fn = std::move(backward);
  }
  return Tensor(std::move(n));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward primitives
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeMismatch("matmul: incompatible shapes");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode& self) {
        an->ensure_grad();
        bn->ensure_grad();
        // dA = dC * B^T ; dB = A^T * dC
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double g = self.grad[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) {
              an->grad[i * k + p] += g * bn->value[p * n + j];
              bn->grad[p * n + j] += g * an->value[i * k + p];
            }
          }
        }
      });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      an->grad[i] += self.grad[i];
      bn->grad[i] += self.grad[i];
    }
  });
}

/// Sum of any number of same-shaped tensors; flat backward fan-out.
inline Tensor add_n(const std::vector<Tensor>& ts) {
  if (ts.empty()) throw ShapeMismatch("add_n: empty operand list");
  std::vector<double> out(ts[0].size(), 0.0);
  for (const auto& t : ts) {
    detail::check_same_shape(ts[0], t, "add_n");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.data()[i];
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const auto& t : ts) nodes.push_back(t.node());
  return detail::make_op(ts[0].shape(), std::move(out), ts, [nodes](TensorNode& self) {
    for (auto& n : nodes) {
      n->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) n->grad[i] += self.grad[i];
    }
  });
}

/// Row-broadcast bias add: A[m,n] + b[n].
inline Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (a.rank() != 2 || bias.rank() != 1 || bias.size() != a.cols())
    throw ShapeMismatch("add_bias: bias width must equal matrix columns");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.data()[j];
  auto an = a.node(), bn = bias.node();
  return detail::make_op({m, n}, std::move(out), {a, bias}, [an, bn, m, n](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        an->grad[i * n + j] += self.grad[i * n + j];
        bn->grad[j] += self.grad[i * n + j];
      }
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, c](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += c * self.grad[i];
  });
}

/// (1 + eps) * A where eps is a learnable scalar tensor.
inline Tensor scale_one_plus(const Tensor& a, const Tensor& eps) {
  if (eps.size() != 1) throw ShapeMismatch("scale_one_plus: eps must be scalar");
  const double e = eps.data()[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 + e) * a.data()[i];
  auto an = a.node(), en = eps.node();
  return detail::make_op(a.shape(), std::move(out), {a, eps}, [an, en, e](TensorNode& self) {
    an->ensure_grad();
    en->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      an->grad[i] += (1.0 + e) * self.grad[i];
      en->grad[0] += self.grad[i] * an->value[i];
    }
  });
}

/// Column-wise concatenation of [m, c_i] blocks.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: empty operand list");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data().data() + i * c, c, out.data() + i * total + off);
    off += c;
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.cols());
  }
  return detail::make_op({m, total}, std::move(out), parts,
                         [nodes, widths, m, total](TensorNode& self) {
                           std::size_t off = 0;
                           for (std::size_t b = 0; b < nodes.size(); ++b) {
                             nodes[b]->ensure_grad();
                             const std::size_t c = widths[b];
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                 nodes[b]->grad[i * c + j] += self.grad[i * total + off + j];
                             off += c;
                           }
                         });
}

/// Row-wise concatenation of [m_i, c] blocks.
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: empty operand list");
  const std::size_t c = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != c) throw ShapeMismatch("concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<std::size_t> heights;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    heights.push_back(p.rows());
  }
  return detail::make_op({rows, c}, std::move(out), parts,
                         [nodes, heights, c](TensorNode& self) {
                           std::size_t off = 0;
                           for (std::size_t b = 0; b < nodes.size(); ++b) {
                             nodes[b]->ensure_grad();
                             const std::size_t count = heights[b] * c;
                             for (std::size_t i = 0; i < count; ++i)
                               nodes[b]->grad[i] += self.grad[off + i];
                             off += count;
                           }
                         });
}

/// Select rows by index; duplicate indices are allowed (gradient accumulates).
inline Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
  if (a.rank() != 2) throw ShapeMismatch("gather_rows: matrix required");
  const std::size_t c = a.cols();
  std::vector<double> out(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows()) throw ShapeMismatch("gather_rows: index out of range");
    std::copy_n(a.data().data() + idx[i] * c, c, out.data() + i * c);
  }
  auto an = a.node();
  return detail::make_op({idx.size(), c}, std::move(out), {a}, [an, idx, c](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) an->grad[idx[i] * c + j] += self.grad[i * c + j];
  });
}

/// Sum rows of A[k,c] into an [m,c] output at positions idx[i].
inline Tensor scatter_sum_rows(const Tensor& a, const std::vector<std::size_t>& idx,
                               std::size_t m) {
  if (a.rank() != 2 || idx.size() != a.rows())
    throw ShapeMismatch("scatter_sum_rows: one index per row required");
  const std::size_t c = a.cols();
  std::vector<double> out(m * c, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m) throw ShapeMismatch("scatter_sum_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) out[idx[i] * c + j] += a.data()[i * c + j];
  }
  auto an = a.node();
  return detail::make_op({m, c}, std::move(out), {a}, [an, idx, c](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[idx[i] * c + j];
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
  });
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.data()[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node();
  auto saved = out;
  return detail::make_op(a.shape(), std::move(out), {a}, [an, saved](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      an->grad[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
  });
}

/// Inverted dropout: in train mode, zero with probability p and scale
/// survivors by 1/(1-p); identity in eval mode.
inline Tensor dropout(const Tensor& a, double p, bool train_mode, Rng* rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout: p must be in [0,1)");
  if (!train_mode || p == 0.0) return a;
  if (rng == nullptr) throw Error("dropout: train mode requires an rng");
  const double keep = 1.0 - p;
  std::vector<double> mask(a.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng->uniform() < p ? 0.0 : 1.0 / keep;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * mask[i];
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, mask](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * mask[i];
  });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto an = a.node();
  return detail::make_op({1}, {s}, {a}, [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->value.size(); ++i) an->grad[i] += self.grad[0];
  });
}

inline Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  auto an = a.node();
  return detail::make_op({1}, {s * inv}, {a}, [an, inv](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->value.size(); ++i) an->grad[i] += self.grad[0] * inv;
  });
}

/// Column means of A[m,n] -> [1,n]; used for mean-pooling readout.
inline Tensor mean_rows(const Tensor& a) {
  if (a.rank() != 2) throw ShapeMismatch("mean_rows: matrix required");
  const std::size_t m = a.rows(), n = a.cols();
  const double inv = 1.0 / static_cast<double>(m);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a.data()[i * n + j] * inv;
  auto an = a.node();
  return detail::make_op({1, n}, std::move(out), {a}, [an, m, n, inv](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j] * inv;
  });
}

/// Max over one axis of A[m,n]: axis 0 -> [1,n], axis 1 -> [m,1]. Gradient is
/// routed to the first maximal element (deterministic under ties).
inline Tensor max_over_axis(const Tensor& a, int axis) {
  if (a.rank() != 2 || (axis != 0 && axis != 1)) throw ShapeMismatch("max_over_axis: bad arguments");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out;
  std::vector<std::size_t> argmax;
  if (axis == 0) {
    out.assign(n, 0.0);
    argmax.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      double best = a.data()[j];
      std::size_t arg = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (a.data()[i * n + j] > best) { best = a.data()[i * n + j]; arg = i; }
      out[j] = best;
      argmax[j] = arg * n + j;
    }
  } else {
    out.assign(m, 0.0);
    argmax.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double best = a.data()[i * n];
      std::size_t arg = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (a.data()[i * n + j] > best) { best = a.data()[i * n + j]; arg = j; }
      out[i] = best;
      argmax[i] = i * n + arg;
    }
  }
  std::vector<std::size_t> shape = axis == 0 ? std::vector<std::size_t>{1, n}
                                             : std::vector<std::size_t>{m, 1};
  auto an = a.node();
  return detail::make_op(std::move(shape), std::move(out), {a}, [an, argmax](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < argmax.size(); ++i) an->grad[argmax[i]] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Losses (numerically stable fused forms)
// ---------------------------------------------------------------------------

namespace detail {
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
inline double sigmoid_stable(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
}  // namespace detail

/// Sum over elements of BCE(logit, target) in log-sum-exp form. Targets may be
/// soft values in [0,1].
inline Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  if (logits.size() != targets.size()) throw ShapeMismatch("bce_with_logits: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double z = logits.data()[i];
    // softplus(z) - z*y  ==  -[y*log(sig(z)) + (1-y)*log(1-sig(z))]
    total += detail::softplus(z) - z * targets[i];
  }
  auto ln = logits.node();
  return detail::make_op({1}, {total}, {logits}, [ln, targets](TensorNode& self) {
    ln->ensure_grad();
    for (std::size_t i = 0; i < targets.size(); ++i)
      ln->grad[i] += self.grad[0] * (detail::sigmoid_stable(ln->value[i]) - targets[i]);
  });
}

/// Weighted BCE with positive-class weight: sum of
/// pos_weight*y*softplus(-z) + (1-y)*softplus(z).
inline Tensor weighted_bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                                       double pos_weight) {
  if (logits.size() != targets.size())
    throw ShapeMismatch("weighted_bce_with_logits: size mismatch");
  if (!(pos_weight > 0.0)) throw Error("weighted_bce_with_logits: pos_weight must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double z = logits.data()[i];
    total += pos_weight * targets[i] * detail::softplus(-z) +
             (1.0 - targets[i]) * detail::softplus(z);
  }
  auto ln = logits.node();
  return detail::make_op({1}, {total}, {logits}, [ln, targets, pos_weight](TensorNode& self) {
    ln->ensure_grad();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double s = detail::sigmoid_stable(ln->value[i]);
      ln->grad[i] += self.grad[0] * (pos_weight * targets[i] * (s - 1.0) +
                                     (1.0 - targets[i]) * s);
    }
  });
}

/// Hinge ranking loss max(0, margin - z_i + z_j) over paired scalars.
inline Tensor margin_ranking(const Tensor& z_i, const Tensor& z_j, double margin) {
  if (z_i.size() != 1 || z_j.size() != 1) throw NotScalar("margin_ranking: scalar inputs required");
  const double v = margin - z_i.data()[0] + z_j.data()[0];
  const double loss = v > 0.0 ? v : 0.0;
  auto in = z_i.node(), jn = z_j.node();
  const bool active = v > 0.0;
  return detail::make_op({1}, {loss}, {z_i, z_j}, [in, jn, active](TensorNode& self) {
    in->ensure_grad();
    jn->ensure_grad();
    if (active) {
      in->grad[0] -= self.grad[0];
      jn->grad[0] += self.grad[0];
    }
  });
}

/// Softmax cross-entropy of a logit row against a one-hot positive index.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::size_t positive) {
  if (positive >= logits.size()) throw BadIndex("softmax_cross_entropy: positive index out of range");
  double mx = logits.data()[0];
  for (double v : logits.data()) mx = std::max(mx, v);
  double lse = 0.0;
  for (double v : logits.data()) lse += std::exp(v - mx);
  lse = mx + std::log(lse);
  const double loss = lse - logits.data()[positive];
  auto ln = logits.node();
  return detail::make_op({1}, {loss}, {logits}, [ln, positive, lse](TensorNode& self) {
    ln->ensure_grad();
    for (std::size_t i = 0; i < ln->value.size(); ++i) {
      const double p = std::exp(ln->value[i] - lse);
      ln->grad[i] += self.grad[0] * (p - (i == positive ? 1.0 : 0.0));
    }
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Populates grads of every reachable
/// tensor that requires them; unreachable parameters keep zero grads.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) throw NotScalar("backward: loss must be scalar");
  // Topological order by iterative post-order DFS over parents.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) {
      (*it)->ensure_grad();
      (*it)->backward_fn(**it);
    }
  }
}

}  // namespace planverify::nn
