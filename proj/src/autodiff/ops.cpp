#include "sgmi/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "sgmi/core/error.hpp"

namespace sgmi::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data().data(), t.rows(), t.cols()); }

void require_matrix(std::string_view op, const Tensor& t) {
  if (t.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected rank <= 2, got shape " + shape_str(t.shape()));
  }
}

Tape& same_tape(std::string_view op, Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands are not on the same tape");
  }
  return a.tape();
}

[[noreturn]] void mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

std::vector<std::size_t> to_vector(std::span<const std::size_t> s) { return {s.begin(), s.end()}; }

// ---- broadcasting element-wise binary ops ----

struct Broadcast {
  std::size_t rows, cols;
  Shape shape;
};

Broadcast broadcast_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  require_matrix(op, a);
  require_matrix(op, b);
  auto join = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    mismatch(op, a.shape(), b.shape());
  };
  Broadcast out{join(a.rows(), b.rows()), join(a.cols(), b.cols()), {}};
  if (a.shape() == b.shape()) {
    out.shape = a.shape();
  } else if (a.rank() == 0 && b.rank() == 0) {
    out.shape = {};
  } else {
    out.shape = {out.rows, out.cols};
  }
  return out;
}

// Element (i, j) of t viewed under broadcasting.
inline double at(const Tensor& t, std::size_t i, std::size_t j) {
  const std::size_t r = t.rows() == 1 ? 0 : i;
  const std::size_t c = t.cols() == 1 ? 0 : j;
  return t[r * t.cols() + c];
}

// Sums a broadcast gradient back onto the operand's own shape.
Tensor reduce_to(const Tensor& g, std::size_t rows, std::size_t cols, const Tensor& like) {
  Tensor out(like.shape());
  const std::size_t oc = like.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t r = like.rows() == 1 ? 0 : i;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t c = oc == 1 ? 0 : j;
      out[r * oc + c] += g[i * cols + j];
    }
  }
  return out;
}

template <typename F>
Tensor apply_binary(const Broadcast& bc, const Tensor& a, const Tensor& b, F f) {
  Tensor out(bc.shape);
  if (a.shape() == b.shape()) {
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] = f(a[k], b[k]);
    return out;
  }
  for (std::size_t i = 0; i < bc.rows; ++i) {
    for (std::size_t j = 0; j < bc.cols; ++j) out[i * bc.cols + j] = f(at(a, i, j), at(b, i, j));
  }
  return out;
}

template <typename F>
Var unary(std::string_view op, Var a, F f, Tape::BackwardFn backward) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.numel(); ++k) out[k] = f(x[k]);
  return a.tape().record(op, std::move(out), {a.id()}, std::move(backward));
}

}  // namespace

double softplus_value(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) mismatch("matmul", a.shape(), b.shape());
  Tensor out({a.rows(), b.cols()});
  if (out.numel() == 0) return out;
  if (a.cols() == 0) return out;
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape("matmul", a, b);
  Tensor out = matmul_values(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor ga({av.rows(), av.cols()});
      if (ga.numel() && g.numel()) as_matrix(ga).noalias() = as_matrix(g) * as_matrix(bv).transpose();
      t.accumulate(ia, ga.reshaped(av.shape()));
    }
    if (t.requires_grad(ib)) {
      Tensor gb({bv.rows(), bv.cols()});
      if (gb.numel() && g.numel()) as_matrix(gb).noalias() = as_matrix(av).transpose() * as_matrix(g);
      t.accumulate(ib, gb.reshaped(bv.shape()));
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_matrix("transpose", x);
  Tensor out({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {ia}, [ia](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    Tensor gx({xv.rows(), xv.cols()});
    for (std::size_t i = 0; i < xv.rows(); ++i)
      for (std::size_t j = 0; j < xv.cols(); ++j) gx(i, j) = g[j * xv.rows() + i];
    t.accumulate(ia, gx.reshaped(xv.shape()));
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape("add", a, b);
  const Broadcast bc = broadcast_shape("add", a.value(), b.value());
  Tensor out = apply_binary(bc, a.value(), b.value(), [](double x, double y) { return x + y; });
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t r = bc.rows, c = bc.cols;
  return tape.record("add", std::move(out), {ia, ib}, [ia, ib, r, c](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, reduce_to(g, r, c, t.value(ia)));
    if (t.requires_grad(ib)) t.accumulate(ib, reduce_to(g, r, c, t.value(ib)));
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape("sub", a, b);
  const Broadcast bc = broadcast_shape("sub", a.value(), b.value());
  Tensor out = apply_binary(bc, a.value(), b.value(), [](double x, double y) { return x - y; });
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t r = bc.rows, c = bc.cols;
  return tape.record("sub", std::move(out), {ia, ib}, [ia, ib, r, c](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, reduce_to(g, r, c, t.value(ia)));
    if (t.requires_grad(ib)) {
      Tensor gb = reduce_to(g, r, c, t.value(ib));
      for (double& v : gb.data()) v = -v;
      t.accumulate(ib, std::move(gb));
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape("mul", a, b);
  const Broadcast bc = broadcast_shape("mul", a.value(), b.value());
  Tensor out = apply_binary(bc, a.value(), b.value(), [](double x, double y) { return x * y; });
  const std::size_t ia = a.id(), ib = b.id();
  const std::size_t r = bc.rows, c = bc.cols;
  return tape.record("mul", std::move(out), {ia, ib}, [ia, ib, r, c](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    Tensor full({r, c});
    if (t.requires_grad(ia)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) full[i * c + j] = g[i * c + j] * at(bv, i, j);
      t.accumulate(ia, reduce_to(full, r, c, av));
    }
    if (t.requires_grad(ib)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) full[i * c + j] = g[i * c + j] * at(av, i, j);
      t.accumulate(ib, reduce_to(full, r, c, bv));
    }
  });
}

Var scale(Var a, double factor) {
  const std::size_t ia = a.id();
  return unary("scale", a, [factor](double x) { return x * factor; }, [ia, factor](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (double& v : gx.data()) v *= factor;
    t.accumulate(ia, std::move(gx));
  });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [ia](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor gx(x.shape());
    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = x[k] > 0.0 ? g[k] : 0.0;
    t.accumulate(ia, std::move(gx));
  });
}

Var softplus(Var a) {
  const std::size_t ia = a.id();
  return unary("softplus", a, softplus_value, [ia](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor gx(x.shape());
    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = g[k] * sigmoid_value(x[k]);
    t.accumulate(ia, std::move(gx));
  });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw ContractError("log: non-positive input " + std::to_string(x));
  }
  const std::size_t ia = a.id();
  return unary("log", a, [](double x) { return std::log(x); }, [ia](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor gx(x.shape());
    for (std::size_t k = 0; k < x.numel(); ++k) gx[k] = g[k] / x[k];
    t.accumulate(ia, std::move(gx));
  });
}

Var exp(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.numel(); ++k) out[k] = std::exp(x[k]);
  const std::size_t ia = a.id();
  Tensor copy = out;
  return a.tape().record("exp", std::move(out), {ia}, [ia, y = std::move(copy)](Tape& t, const Tensor& g) {
    Tensor gx(y.shape());
    for (std::size_t k = 0; k < y.numel(); ++k) gx[k] = g[k] * y[k];
    t.accumulate(ia, std::move(gx));
  });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  require_matrix("softmax_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, x[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (out[i * c + j] = std::exp(x[i * c + j] - m));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
  }
  const std::size_t ia = a.id();
  Tensor copy = out;
  return a.tape().record("softmax_rows", std::move(out), {ia},
                         [ia, y = std::move(copy), r, c](Tape& t, const Tensor& g) {
                           Tensor gx(y.shape());
                           for (std::size_t i = 0; i < r; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                             for (std::size_t j = 0; j < c; ++j)
                               gx[i * c + j] = y[i * c + j] * (g[i * c + j] - dot);
                           }
                           t.accumulate(ia, std::move(gx));
                         });
}

Var log_softmax_rows(Var a) {
  const Tensor& x = a.value();
  require_matrix("log_softmax_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, x[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(x[i * c + j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] - lse;
  }
  const std::size_t ia = a.id();
  Tensor copy = out;
  return a.tape().record("log_softmax_rows", std::move(out), {ia},
                         [ia, y = std::move(copy), r, c](Tape& t, const Tensor& g) {
                           Tensor gx(y.shape());
                           for (std::size_t i = 0; i < r; ++i) {
                             double gs = 0.0;
                             for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
                             for (std::size_t j = 0; j < c; ++j)
                               gx[i * c + j] = g[i * c + j] - std::exp(y[i * c + j]) * gs;
                           }
                           t.accumulate(ia, std::move(gx));
                         });
}

Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("stack_rows: no inputs");
  Tape& tape = parts.front().tape();
  const std::size_t c = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    same_tape("stack_rows", parts.front(), p);
    require_matrix("stack_rows", p.value());
    if (p.value().cols() != c) mismatch("stack_rows", parts.front().shape(), p.shape());
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.value().rows();
  }
  Tensor out({total, c});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offsets[k] * c));
  }
  std::vector<std::size_t> inputs = ids;
  return tape.record("stack_rows", std::move(out), std::move(inputs),
                     [ids, offsets, c](Tape& t, const Tensor& g) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         const Tensor& v = t.value(ids[k]);
                         auto begin = g.data().begin() + static_cast<std::ptrdiff_t>(offsets[k] * c);
                         t.accumulate(ids[k], Tensor(v.shape(), std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(v.numel()))));
                       }
                     });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  const Tensor& x = a.value();
  require_matrix("gather_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out({indices.size(), c});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= r) {
      throw IndexError("gather_rows: index " + std::to_string(indices[k]) + " out of range for " +
                       std::to_string(r) + " rows");
    }
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(indices[k] * c), c,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  const std::size_t ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {ia},
                         [ia, idx = to_vector(indices), c](Tape& t, const Tensor& g) {
                           const Tensor& xv = t.value(ia);
                           Tensor gx(xv.shape());
                           for (std::size_t k = 0; k < idx.size(); ++k)
                             for (std::size_t j = 0; j < c; ++j) gx[idx[k] * c + j] += g[k * c + j];
                           t.accumulate(ia, std::move(gx));
                         });
}

namespace {

Var scatter_impl(std::string_view op, Var a, std::span<const std::size_t> indices, std::size_t size) {
  const Tensor& x = a.value();
  require_matrix(op, x);
  const std::size_t c = x.cols();
  if (indices.size() != x.rows()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(indices.size()) + " indices for " +
                         std::to_string(x.rows()) + " rows");
  }
  Tensor out({size, c});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size) {
      throw IndexError(std::string(op) + ": index " + std::to_string(indices[k]) + " out of range for " +
                       std::to_string(size) + " rows");
    }
    for (std::size_t j = 0; j < c; ++j) out[indices[k] * c + j] += x[k * c + j];
  }
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(out), {ia}, [ia, idx = to_vector(indices), c](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    Tensor gx(xv.shape());
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < c; ++j) gx[k * c + j] = g[idx[k] * c + j];
    t.accumulate(ia, std::move(gx));
  });
}

}  // namespace

Var scatter_add_rows(Var a, std::span<const std::size_t> indices, std::size_t size) {
  return scatter_impl("scatter_add_rows", a, indices, size);
}

Var row_sum_segments(Var a, std::span<const std::size_t> segment_ids, std::size_t num_segments) {
  return scatter_impl("row_sum_segments", a, segment_ids, num_segments);
}

Var column(Var a, std::size_t j) {
  const Tensor& x = a.value();
  require_matrix("column", x);
  const std::size_t r = x.rows(), c = x.cols();
  if (j >= c) throw IndexError("column: index " + std::to_string(j) + " out of range for " + std::to_string(c) + " columns");
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) out[i] = x[i * c + j];
  const std::size_t ia = a.id();
  return a.tape().record("column", std::move(out), {ia}, [ia, j, c](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ia);
    Tensor gx(xv.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i * c + j] = g[i];
    t.accumulate(ia, std::move(gx));
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {ia}, [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, g.reshaped(t.value(ia).shape()));
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {ia}, [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, Tensor(t.value(ia).shape(), g.item()));
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw ContractError("mean: empty tensor");
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ia = a.id();
  return a.tape().record("mean", Tensor::scalar(s / static_cast<double>(n)), {ia}, [ia, n](Tape& t, const Tensor& g) {
    t.accumulate(ia, Tensor(t.value(ia).shape(), g.item() / static_cast<double>(n)));
  });
}

}  // namespace sgmi::ad
