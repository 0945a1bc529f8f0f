#pragma once

// Dense 64-bit tensors with reverse-mode automatic differentiation on an
// explicit tape. A Var is a lightweight handle into the tape; every op
// records a backward closure that scatters this node's gradient into its
// parents. One tape per training step, confined to one thread.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmfnet {

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : TensorError {
  using TensorError::TensorError;
};
struct NotScalar : TensorError {
  using TensorError::TensorError;
};
struct EmptySegment : TensorError {
  using TensorError::TensorError;
};
struct EmptyGraph : TensorError {
  using TensorError::TensorError;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)) {
    data.assign(numel_of(shape), fill);
  }

  static std::size_t numel_of(const std::vector<std::size_t> &s) {
    std::size_t n = 1;
    for (auto d : s)
      n *= d;
    return s.empty() ? 0 : n;
  }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }
  static Tensor vector(std::vector<double> v) {
    Tensor t;
    t.shape = {v.size()};
    t.data = std::move(v);
    return t;
  }
  static Tensor matrix(std::size_t r, std::size_t c, double fill = 0.0) {
    return Tensor({r, c}, fill);
  }
  static Tensor from_rows(const std::vector<std::vector<double>> &rows) {
    Tensor t({rows.size(), rows.empty() ? 0 : rows[0].size()});
    std::size_t k = 0;
    for (const auto &r : rows)
      for (double v : r)
        t.data[k++] = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  double &at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double &at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }

  bool same_shape(const Tensor &o) const { return shape == o.shape; }

  double item() const {
    if (numel() != 1)
      throw NotScalar("expected a scalar tensor");
    return data[0];
  }
};

inline std::string shape_str(const Tensor &t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i)
    s += (i ? "x" : "") + std::to_string(t.shape[i]);
  return s + "]";
}

inline void require_same_shape(const Tensor &a, const Tensor &b,
                               const char *op) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a) +
                        " vs " + shape_str(b));
}

class Tape;

struct Var {
  Tape *tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor &val() const;
};

class Tape {
public:
  struct Node {
    Tensor value;
    Tensor grad;
    bool touched = false;
    std::function<void(Tape &, const Tensor &)> backward;  // gradient fan-out
  };

  Var leaf(Tensor value) {
    return push(std::move(value), nullptr);
  }

  Var push(Tensor value, std::function<void(Tape &, const Tensor &)> back) {
    Node node;
    node.value = std::move(value);
    node.backward = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor &value(int id) const { return nodes_[id].value; }

  // Gradient of a node after backward(); untouched nodes read as zeros.
  Tensor grad(int id) const {
    const Node &n = nodes_[id];
    if (n.grad.numel() == 0)
      return Tensor(n.value.shape, 0.0);
    return n.grad;
  }

  // Adds `delta` into the gradient buffer of node `id`.
  void accumulate(int id, const Tensor &delta) {
    Node &n = nodes_[id];
    if (n.grad.numel() == 0)
      n.grad = Tensor(n.value.shape, 0.0);
    require_same_shape(n.grad, delta, "accumulate");
    for (std::size_t i = 0; i < delta.numel(); ++i)
      n.grad.data[i] += delta.data[i];
    n.touched = true;
  }

  void accumulate_at(int id, std::size_t flat_index, double delta) {
    Node &n = nodes_[id];
    if (n.grad.numel() == 0)
      n.grad = Tensor(n.value.shape, 0.0);
    n.grad.data[flat_index] += delta;
    n.touched = true;
  }

  // Reverse traversal from a scalar loss node.
  void backward(Var loss) {
    if (!loss.valid() || loss.tape != this)
      throw TensorError("backward: loss not on this tape");
    Node &ln = nodes_[loss.id];
    if (ln.value.numel() != 1)
      throw NotScalar("backward: loss must be scalar");
    if (ln.grad.numel() == 0)
      ln.grad = Tensor(ln.value.shape, 0.0);
    ln.grad.data[0] = 1.0;
    ln.touched = true;
    for (int id = loss.id; id >= 0; --id) {
      Node &n = nodes_[id];
      if (!n.touched || !n.backward)
        continue;
      if (n.grad.numel() == 0)
        continue;
      n.backward(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

private:
  std::vector<Node> nodes_;
};

inline const Tensor &Var::val() const { return tape->value(id); }

// --- elementwise -------------------------------------------------------------

namespace ops {

inline Var add(Var a, Var b) {
  require_same_shape(a.val(), b.val(), "add");
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] += b.val().data[i];
  int pa = a.id, pb = b.id;
  return a.tape->push(std::move(out), [pa, pb](Tape &t, const Tensor &g) {
    t.accumulate(pa, g);
    t.accumulate(pb, g);
  });
}

inline Var mul(Var a, Var b) {
  require_same_shape(a.val(), b.val(), "mul");
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] *= b.val().data[i];
  int pa = a.id, pb = b.id;
  return a.tape->push(std::move(out), [pa, pb](Tape &t, const Tensor &g) {
    const Tensor &va = t.value(pa), &vb = t.value(pb);
    Tensor da(va.shape), db(vb.shape);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      da.data[i] = g.data[i] * vb.data[i];
      db.data[i] = g.data[i] * va.data[i];
    }
    t.accumulate(pa, da);
    t.accumulate(pb, db);
  });
}

// a*x + c, elementwise with scalar coefficients.
inline Var affine(Var x, double a, double c) {
  Tensor out = x.val();
  for (double &v : out.data)
    v = a * v + c;
  int px = x.id;
  return x.tape->push(std::move(out), [px, a](Tape &t, const Tensor &g) {
    Tensor dx(g.shape);
    for (std::size_t i = 0; i < g.numel(); ++i)
      dx.data[i] = a * g.data[i];
    t.accumulate(px, dx);
  });
}

inline Var sub(Var a, Var b) { return add(a, affine(b, -1.0, 0.0)); }

// Elementwise multiply by a constant tensor (same shape).
inline Var cmul(Var x, const Tensor &k) {
  require_same_shape(x.val(), k, "cmul");
  Tensor out = x.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] *= k.data[i];
  int px = x.id;
  Tensor kcopy = k;
  return x.tape->push(std::move(out),
                      [px, kcopy](Tape &t, const Tensor &g) {
                        Tensor dx(g.shape);
                        for (std::size_t i = 0; i < g.numel(); ++i)
                          dx.data[i] = g.data[i] * kcopy.data[i];
                        t.accumulate(px, dx);
                      });
}

// Elementwise add of a constant tensor (same shape).
inline Var cadd(Var x, const Tensor &k) {
  require_same_shape(x.val(), k, "cadd");
  Tensor out = x.val();
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] += k.data[i];
  int px = x.id;
  return x.tape->push(std::move(out), [px](Tape &t, const Tensor &g) {
    t.accumulate(px, g);
  });
}

namespace unary_detail {

template <typename Fwd, typename Bwd>
Var unary(Var x, Fwd fwd, Bwd bwd) {
  Tensor out = x.val();
  for (double &v : out.data)
    v = fwd(v);
  int px = x.id;
  return x.tape->push(std::move(out), [px, bwd](Tape &t, const Tensor &g) {
    const Tensor &vx = t.value(px);
    Tensor dx(vx.shape);
    for (std::size_t i = 0; i < g.numel(); ++i)
      dx.data[i] = g.data[i] * bwd(vx.data[i]);
    t.accumulate(px, dx);
  });
}

} // namespace unary_detail

inline Var sigmoid(Var x) {
  return unary_detail::unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double v) {
        double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
}

inline Var relu(Var x) {
  return unary_detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(Var x, double slope) {
  return unary_detail::unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

inline Var cos_op(Var x) {
  return unary_detail::unary(x, [](double v) { return std::cos(v); },
                             [](double v) { return -std::sin(v); });
}

inline Var sin_op(Var x) {
  return unary_detail::unary(x, [](double v) { return std::sin(v); },
                             [](double v) { return std::cos(v); });
}

inline Var log_op(Var x) {
  return unary_detail::unary(x, [](double v) { return std::log(v); },
                             [](double v) { return 1.0 / v; });
}

// Gradient is passed through strictly inside (lo, hi) and cut at the rails.
inline Var clamp_op(Var x, double lo, double hi) {
  return unary_detail::unary(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// --- linear algebra ----------------------------------------------------------

inline Tensor matmul_values(const Tensor &a, const Tensor &b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
    throw ShapeMismatch("matmul: " + shape_str(a) + " x " + shape_str(b));
  std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double *arow = &a.data[i * k];
    double *orow = &out.data[i * n];
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0)
        continue;
      const double *brow = &b.data[kk * n];
      for (std::size_t j = 0; j < n; ++j)
        orow[j] += av * brow[j];
    }
  }
  return out;
}

inline Tensor transpose_values(const Tensor &a) {
  if (a.rank() != 2)
    throw ShapeMismatch("transpose: need rank-2, got " + shape_str(a));
  Tensor out({a.shape[1], a.shape[0]});
  for (std::size_t i = 0; i < a.shape[0]; ++i)
    for (std::size_t j = 0; j < a.shape[1]; ++j)
      out.at(j, i) = a.at(i, j);
  return out;
}

inline Var matmul(Var a, Var b) {
  Tensor out = matmul_values(a.val(), b.val());
  int pa = a.id, pb = b.id;
  return a.tape->push(std::move(out), [pa, pb](Tape &t, const Tensor &g) {
    const Tensor &va = t.value(pa), &vb = t.value(pb);
    t.accumulate(pa, matmul_values(g, transpose_values(vb)));
    t.accumulate(pb, matmul_values(transpose_values(va), g));
  });
}

inline Var transpose(Var a) {
  Tensor out = transpose_values(a.val());
  int pa = a.id;
  return a.tape->push(std::move(out), [pa](Tape &t, const Tensor &g) {
    t.accumulate(pa, transpose_values(g));
  });
}

// Adds a bias row vector to every row of x.
inline Var add_bias(Var x, Var b) {
  const Tensor &vx = x.val(), &vb = b.val();
  if (vx.rank() != 2 || vb.numel() != vx.shape[1])
    throw ShapeMismatch("add_bias: " + shape_str(vx) + " + " + shape_str(vb));
  Tensor out = vx;
  std::size_t n = vx.shape[0], d = vx.shape[1];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] += vb.data[j];
  int px = x.id, pb = b.id;
  return x.tape->push(std::move(out), [px, pb](Tape &t, const Tensor &g) {
    t.accumulate(px, g);
    Tensor db(t.value(pb).shape, 0.0);
    std::size_t n2 = g.shape[0], d2 = g.shape[1];
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        db.data[j] += g.data[i * d2 + j];
    t.accumulate(pb, db);
  });
}

// Multiplies every row of x elementwise by a constant coefficient vector.
inline Var scale_cols(Var x, const Tensor &coeff) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2 || coeff.numel() != vx.shape[1])
    throw ShapeMismatch("scale_cols: " + shape_str(vx) + " by " +
                        shape_str(coeff));
  Tensor out = vx;
  std::size_t n = vx.shape[0], d = vx.shape[1];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[i * d + j] *= coeff.data[j];
  int px = x.id;
  Tensor k = coeff;
  return x.tape->push(std::move(out), [px, k](Tape &t, const Tensor &g) {
    Tensor dx(g.shape);
    std::size_t n2 = g.shape[0], d2 = g.shape[1];
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        dx.data[i * d2 + j] = g.data[i * d2 + j] * k.data[j];
    t.accumulate(px, dx);
  });
}

// --- normalization and softmax ----------------------------------------------

// Per-row layer normalization with biased variance:
// (x - mean) / sqrt(var + eps) * gamma + beta.
inline Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("layer_norm: need rank-2, got " + shape_str(vx));
  std::size_t n = vx.shape[0], d = vx.shape[1];
  if (gamma.val().numel() != d || beta.val().numel() != d)
    throw ShapeMismatch("layer_norm: parameter width mismatch");

  Tensor xhat({n, d});
  Tensor inv_std({n});
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      mean += vx.at(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = vx.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std.data[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      double xh = (vx.at(i, j) - mean) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * gamma.val().data[j] + beta.val().data[j];
    }
  }

  int px = x.id, pg = gamma.id, pb = beta.id;
  return x.tape->push(
      std::move(out),
      [px, pg, pb, xhat, inv_std](Tape &t, const Tensor &g) {
        std::size_t n2 = g.shape[0], d2 = g.shape[1];
        const Tensor &vgamma = t.value(pg);
        Tensor dgamma(vgamma.shape, 0.0);
        Tensor dbeta(vgamma.shape, 0.0);
        Tensor dx(g.shape, 0.0);
        for (std::size_t i = 0; i < n2; ++i) {
          double mean_gy = 0.0, mean_gy_xhat = 0.0;
          for (std::size_t j = 0; j < d2; ++j) {
            double gy = g.at(i, j) * vgamma.data[j];
            mean_gy += gy;
            mean_gy_xhat += gy * xhat.at(i, j);
            dgamma.data[j] += g.at(i, j) * xhat.at(i, j);
            dbeta.data[j] += g.at(i, j);
          }
          mean_gy /= static_cast<double>(d2);
          mean_gy_xhat /= static_cast<double>(d2);
          for (std::size_t j = 0; j < d2; ++j) {
            double gy = g.at(i, j) * vgamma.data[j];
            dx.at(i, j) =
                inv_std.data[i] * (gy - mean_gy - xhat.at(i, j) * mean_gy_xhat);
          }
        }
        t.accumulate(px, dx);
        t.accumulate(pg, dgamma);
        t.accumulate(pb, dbeta);
      });
}

inline Var softmax_rows(Var x) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("softmax_rows: need rank-2, got " + shape_str(vx));
  std::size_t n = vx.shape[0], d = vx.shape[1];
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = vx.at(i, 0);
    for (std::size_t j = 1; j < d; ++j)
      mx = std::max(mx, vx.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      denom += std::exp(vx.at(i, j) - mx);
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = std::exp(vx.at(i, j) - mx) / denom;
  }
  int px = x.id;
  Tensor saved = out;
  return x.tape->push(std::move(out), [px, saved](Tape &t, const Tensor &g) {
    std::size_t n2 = g.shape[0], d2 = g.shape[1];
    Tensor dx(g.shape);
    for (std::size_t i = 0; i < n2; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d2; ++j)
        dot += g.at(i, j) * saved.at(i, j);
      for (std::size_t j = 0; j < d2; ++j)
        dx.at(i, j) = saved.at(i, j) * (g.at(i, j) - dot);
    }
    t.accumulate(px, dx);
  });
}

// --- reductions ---------------------------------------------------------------

inline Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.val().data)
    s += v;
  int px = x.id;
  return x.tape->push(Tensor::scalar(s), [px](Tape &t, const Tensor &g) {
    Tensor dx(t.value(px).shape, g.data[0]);
    t.accumulate(px, dx);
  });
}

inline Var row_sums(Var x) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("row_sums: need rank-2, got " + shape_str(vx));
  std::size_t n = vx.shape[0], d = vx.shape[1];
  Tensor out({n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[i] += vx.at(i, j);
  int px = x.id;
  return x.tape->push(std::move(out), [px](Tape &t, const Tensor &g) {
    const Tensor &vx2 = t.value(px);
    Tensor dx(vx2.shape);
    std::size_t n2 = vx2.shape[0], d2 = vx2.shape[1];
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        dx.at(i, j) = g.data[i];
    t.accumulate(px, dx);
  });
}

inline Var col_sums(Var x) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("col_sums: need rank-2, got " + shape_str(vx));
  std::size_t n = vx.shape[0], d = vx.shape[1];
  Tensor out({d}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.data[j] += vx.at(i, j);
  int px = x.id;
  return x.tape->push(std::move(out), [px](Tape &t, const Tensor &g) {
    const Tensor &vx2 = t.value(px);
    Tensor dx(vx2.shape);
    std::size_t n2 = vx2.shape[0], d2 = vx2.shape[1];
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        dx.at(i, j) = g.data[j];
    t.accumulate(px, dx);
  });
}

// --- structure ops -------------------------------------------------------------

inline Var reshape(Var x, std::vector<std::size_t> shape) {
  if (Tensor::numel_of(shape) != x.val().numel())
    throw ShapeMismatch("reshape: element count mismatch");
  Tensor out = x.val();
  out.shape = shape;
  int px = x.id;
  return x.tape->push(std::move(out), [px](Tape &t, const Tensor &g) {
    Tensor dx = g;
    dx.shape = t.value(px).shape;
    t.accumulate(px, dx);
  });
}

inline Var concat_cols(const std::vector<Var> &parts) {
  if (parts.empty())
    throw ShapeMismatch("concat_cols: no inputs");
  std::size_t n = parts[0].val().shape.at(0);
  std::size_t total = 0;
  for (const Var &p : parts) {
    if (p.val().rank() != 2 || p.val().shape[0] != n)
      throw ShapeMismatch("concat_cols: row count mismatch");
    total += p.val().shape[1];
  }
  Tensor out({n, total});
  std::size_t off = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const Var &p : parts) {
    std::size_t d = p.val().shape[1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.at(i, off + j) = p.val().at(i, j);
    ids.push_back(p.id);
    widths.push_back(d);
    off += d;
  }
  return parts[0].tape->push(
      std::move(out), [ids, widths](Tape &t, const Tensor &g) {
        std::size_t n2 = g.shape[0];
        std::size_t off2 = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor dp({n2, widths[k]});
          for (std::size_t i = 0; i < n2; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
              dp.at(i, j) = g.at(i, off2 + j);
          t.accumulate(ids[k], dp);
          off2 += widths[k];
        }
      });
}

inline Var concat_rows(const std::vector<Var> &parts) {
  if (parts.empty())
    throw ShapeMismatch("concat_rows: no inputs");
  std::size_t d = parts[0].val().shape.at(1);
  std::size_t total = 0;
  for (const Var &p : parts) {
    if (p.val().rank() != 2 || p.val().shape[1] != d)
      throw ShapeMismatch("concat_rows: column count mismatch");
    total += p.val().shape[0];
  }
  Tensor out({total, d});
  std::size_t off = 0;
  std::vector<int> ids;
  std::vector<std::size_t> heights;
  for (const Var &p : parts) {
    std::size_t n = p.val().shape[0];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.at(off + i, j) = p.val().at(i, j);
    ids.push_back(p.id);
    heights.push_back(n);
    off += n;
  }
  return parts[0].tape->push(
      std::move(out), [ids, heights, d](Tape &t, const Tensor &g) {
        std::size_t off2 = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor dp({heights[k], d});
          for (std::size_t i = 0; i < heights[k]; ++i)
            for (std::size_t j = 0; j < d; ++j)
              dp.at(i, j) = g.at(off2 + i, j);
          t.accumulate(ids[k], dp);
          off2 += heights[k];
        }
      });
}

inline Var slice_cols(Var x, std::size_t from, std::size_t to) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2 || from >= to || to > vx.shape[1])
    throw ShapeMismatch("slice_cols: bad range");
  std::size_t n = vx.shape[0], w = to - from;
  Tensor out({n, w});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.at(i, j) = vx.at(i, from + j);
  int px = x.id;
  return x.tape->push(std::move(out), [px, from](Tape &t, const Tensor &g) {
    const Tensor &vx2 = t.value(px);
    Tensor dx(vx2.shape, 0.0);
    for (std::size_t i = 0; i < g.shape[0]; ++i)
      for (std::size_t j = 0; j < g.shape[1]; ++j)
        dx.at(i, from + j) = g.at(i, j);
    t.accumulate(px, dx);
  });
}

inline Var gather_rows(Var x, std::vector<int> idx) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("gather_rows: need rank-2, got " + shape_str(vx));
  std::size_t d = vx.shape[1];
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= vx.shape[0])
      throw ShapeMismatch("gather_rows: index out of range");
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = vx.at(static_cast<std::size_t>(idx[i]), j);
  }
  int px = x.id;
  return x.tape->push(std::move(out), [px, idx](Tape &t, const Tensor &g) {
    const Tensor &vx2 = t.value(px);
    Tensor dx(vx2.shape, 0.0);
    std::size_t d2 = g.shape[1];
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d2; ++j)
        dx.at(static_cast<std::size_t>(idx[i]), j) += g.at(i, j);
    t.accumulate(px, dx);
  });
}

// Stacks 1-D vectors (or 1xD rows) into a matrix.
inline Var stack_rows(const std::vector<Var> &rows) {
  if (rows.empty())
    throw ShapeMismatch("stack_rows: no inputs");
  std::size_t d = rows[0].val().numel();
  Tensor out({rows.size(), d});
  std::vector<int> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].val().numel() != d)
      throw ShapeMismatch("stack_rows: width mismatch");
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = rows[i].val().data[j];
    ids.push_back(rows[i].id);
  }
  return rows[0].tape->push(std::move(out),
                            [ids, d](Tape &t, const Tensor &g) {
                              for (std::size_t i = 0; i < ids.size(); ++i) {
                                Tensor dr(t.value(ids[i]).shape);
                                for (std::size_t j = 0; j < d; ++j)
                                  dr.data[j] = g.at(i, j);
                                t.accumulate(ids[i], dr);
                              }
                            });
}

// --- segment ops ---------------------------------------------------------------

// Softmax over entries sharing a segment id (1-D input).
inline Var segment_softmax(Var logits, std::vector<int> seg,
                           std::size_t num_segments) {
  const Tensor &vx = logits.val();
  if (vx.rank() != 1 || vx.numel() != seg.size())
    throw ShapeMismatch("segment_softmax: logits/segment mismatch");
  std::vector<double> mx(num_segments,
                         -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < seg.size(); ++k)
    mx[seg[k]] = std::max(mx[seg[k]], vx.data[k]);
  std::vector<double> denom(num_segments, 0.0);
  Tensor out({vx.numel()});
  for (std::size_t k = 0; k < seg.size(); ++k)
    denom[seg[k]] += std::exp(vx.data[k] - mx[seg[k]]);
  for (std::size_t k = 0; k < seg.size(); ++k)
    out.data[k] = std::exp(vx.data[k] - mx[seg[k]]) / denom[seg[k]];
  int px = logits.id;
  Tensor saved = out;
  return logits.tape->push(
      std::move(out),
      [px, seg, num_segments, saved](Tape &t, const Tensor &g) {
        std::vector<double> dot(num_segments, 0.0);
        for (std::size_t k = 0; k < seg.size(); ++k)
          dot[seg[k]] += g.data[k] * saved.data[k];
        Tensor dx(saved.shape);
        for (std::size_t k = 0; k < seg.size(); ++k)
          dx.data[k] = saved.data[k] * (g.data[k] - dot[seg[k]]);
        t.accumulate(px, dx);
      });
}

// out[s] = sum over k with seg[k]==s of alpha[k] * rows[k].
inline Var segment_weighted_sum(Var alpha, Var rows, std::vector<int> seg,
                                std::size_t num_segments) {
  const Tensor &va = alpha.val(), &vr = rows.val();
  if (va.rank() != 1 || vr.rank() != 2 || va.numel() != vr.shape[0] ||
      va.numel() != seg.size())
    throw ShapeMismatch("segment_weighted_sum: shape mismatch");
  std::size_t d = vr.shape[1];
  Tensor out({num_segments, d}, 0.0);
  for (std::size_t k = 0; k < seg.size(); ++k)
    for (std::size_t j = 0; j < d; ++j)
      out.at(seg[k], j) += va.data[k] * vr.at(k, j);
  int pa = alpha.id, pr = rows.id;
  return alpha.tape->push(
      std::move(out), [pa, pr, seg, d](Tape &t, const Tensor &g) {
        const Tensor &va2 = t.value(pa), &vr2 = t.value(pr);
        Tensor da(va2.shape, 0.0);
        Tensor dr(vr2.shape, 0.0);
        for (std::size_t k = 0; k < seg.size(); ++k)
          for (std::size_t j = 0; j < d; ++j) {
            da.data[k] += g.at(seg[k], j) * vr2.at(k, j);
            dr.at(k, j) = va2.data[k] * g.at(seg[k], j);
          }
        t.accumulate(pa, da);
        t.accumulate(pr, dr);
      });
}

// Per-segment arithmetic mean of contiguous row ranges.
inline Var segment_mean(Var x,
                        const std::vector<std::pair<std::size_t, std::size_t>>
                            &ranges) {
  const Tensor &vx = x.val();
  if (vx.rank() != 2)
    throw ShapeMismatch("segment_mean: need rank-2, got " + shape_str(vx));
  std::size_t d = vx.shape[1];
  Tensor out({ranges.size(), d}, 0.0);
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    auto [lo, hi] = ranges[s];
    if (hi <= lo || hi > vx.shape[0])
      throw EmptySegment("segment_mean: empty or out-of-range segment");
    double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.at(s, j) += vx.at(i, j) * inv;
  }
  int px = x.id;
  return x.tape->push(std::move(out), [px, ranges, d](Tape &t,
                                                      const Tensor &g) {
    const Tensor &vx2 = t.value(px);
    Tensor dx(vx2.shape, 0.0);
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      auto [lo, hi] = ranges[s];
      double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t j = 0; j < d; ++j)
          dx.at(i, j) += g.at(s, j) * inv;
    }
    t.accumulate(px, dx);
  });
}

} // namespace ops

} // namespace hmfnet
