// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sendd/errors.hpp"
#include "sendd/simd/kernels.hpp"

namespace sendd::ad {
namespace {

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw ContractError("operation on an empty Var");
  return *v.tape();
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(a.shape()));
}

// Unary elementwise op from forward f and derivative df(x, y).
template <class F, class DF>
Var unary(const char* name, const Var& a, F f, DF df) {
  auto& tape = tape_of(a);
  const auto& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const NodeId ia = a.id();
  Var result;
  result = tape.record(name, std::move(out), {a},
                       [ia, df, self = tape.size()](Tape& t, std::span<const double> g) {
                         const auto& xv = t.value(ia);
                         const auto& yv = t.value(self);
                         auto ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ga[i] += g[i] * df(xv[i], yv[i]);
                       });
  return result;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record("add", std::move(out), {a, b},
                     [ia = a.id(), ib = b.id()](Tape& t, std::span<const double> g) {
                       for (NodeId id : {ia, ib}) {
                         if (!t.requires_grad(id)) continue;
                         auto gx = t.grad_buffer(id);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                     });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record("sub", std::move(out), {a, b},
                     [ia = a.id(), ib = b.id()](Tape& t, std::span<const double> g) {
                       if (t.requires_grad(ia)) {
                         auto ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         auto gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  auto& tape = tape_of(a);
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b},
                     [ia = a.id(), ib = b.id()](Tape& t, std::span<const double> g) {
                       const auto& av = t.value(ia);
                       const auto& bv = t.value(ib);
                       if (t.requires_grad(ia)) {
                         auto ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.requires_grad(ib)) {
                         auto gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

Var scale(const Var& a, double s) {
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return tape.record("scale", std::move(out), {a},
                     [ia = a.id(), s](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                     });
}

Var add_scalar(const Var& a, double s) {
  auto& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return tape.record("add_scalar", std::move(out), {a},
                     [ia = a.id()](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

Var add_rowvec(const Var& x, const Var& v) {
  require_rank("add_rowvec", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (v.size() != m) throw DimensionError("add_rowvec: vector length differs from row width");
  auto& tape = tape_of(x);
  Tensor out = x.value();
  const auto& vv = v.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += vv[c];
  return tape.record("add_rowvec", std::move(out), {x, v},
                     [ix = x.id(), iv = v.id(), n, m](Tape& t, std::span<const double> g) {
                       if (t.requires_grad(ix)) {
                         auto gx = t.grad_buffer(ix);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                       if (t.requires_grad(iv)) {
                         auto gv = t.grad_buffer(iv);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < m; ++c) gv[c] += g[r * m + c];
                       }
                     });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_n of nothing");
  auto& tape = tape_of(terms[0]);
  Tensor out = terms[0].value();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    require_same_shape("add_n", terms[0], terms[k]);
    const auto& tv = terms[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tv[i];
  }
  std::vector<NodeId> ids;
  for (const auto& v : terms) ids.push_back(v.id());
  return tape.record("add_n", std::move(out), terms,
                     [ids](Tape& t, std::span<const double> g) {
                       for (NodeId id : ids) {
                         if (!t.requires_grad(id)) continue;
                         auto gx = t.grad_buffer(id);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       }
                     });
}

Var sum(const Var& a) {
  auto& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record("sum", Tensor::scalar(s), {a},
                     [ia = a.id()](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_buffer(ia);
                       for (auto& x : ga) x += g[0];
                     });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k)
    throw DimensionError("matmul: inner dimensions " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  auto& tape = tape_of(a);
  Tensor out({n, m});
  simd::kernels().matmul_acc(a.value().data(), b.value().data(), out.data(), n, k, m);
  return tape.record(
      "matmul", std::move(out), {a, b},
      [ia = a.id(), ib = b.id(), n, k, m](Tape& t, std::span<const double> g) {
        const auto& kern = simd::kernels();
        if (t.requires_grad(ia)) {
          // dA = G B^T
          const auto& bv = t.value(ib);
          std::vector<double> bt(k * m);
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = bv[p * m + j];
          kern.matmul_acc(g.data(), bt.data(), t.grad_buffer(ia).data(), n, m, k);
        }
        if (t.requires_grad(ib)) {
          // dB = A^T G
          kern.matmul_tn_acc(t.value(ia).data(), g.data(), t.grad_buffer(ib).data(), n, k, m);
        }
      });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank("linear", x, 2);
  require_rank("linear", w, 2);
  const std::size_t n = x.shape()[0], in = x.shape()[1], out_w = w.shape()[1];
  if (w.shape()[0] != in)
    throw DimensionError("linear: input width " + std::to_string(in) + " vs weight " +
                         shape_string(w.shape()));
  if (b.size() != out_w) throw DimensionError("linear: bias length differs from output width");
  auto& tape = tape_of(x);
  Tensor out({n, out_w});
  const auto& bv = b.value();
  for (std::size_t r = 0; r < n; ++r)
    std::copy(bv.values().begin(), bv.values().end(), out.data() + r * out_w);
  simd::kernels().matmul_acc(x.value().data(), w.value().data(), out.data(), n, in, out_w);
  return tape.record(
      "linear", std::move(out), {x, w, b},
      [ix = x.id(), iw = w.id(), ib = b.id(), n, in, out_w](Tape& t,
                                                            std::span<const double> g) {
        const auto& kern = simd::kernels();
        if (t.requires_grad(ix)) {
          const auto& wv = t.value(iw);
          std::vector<double> wt(in * out_w);
          for (std::size_t p = 0; p < in; ++p)
            for (std::size_t j = 0; j < out_w; ++j) wt[j * in + p] = wv[p * out_w + j];
          kern.matmul_acc(g.data(), wt.data(), t.grad_buffer(ix).data(), n, out_w, in);
        }
        if (t.requires_grad(iw))
          kern.matmul_tn_acc(t.value(ix).data(), g.data(), t.grad_buffer(iw).data(), n, in,
                             out_w);
        if (t.requires_grad(ib)) {
          auto gb = t.grad_buffer(ib);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < out_w; ++j) gb[j] += g[r * out_w + j];
        }
      });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  auto& tape = tape_of(a);
  Tensor out({m, n});
  const auto& av = a.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[c * n + r] = av[r * m + c];
  return tape.record("transpose", std::move(out), {a},
                     [ia = a.id(), n, m](Tape& t, std::span<const double> g) {
                       auto ga = t.grad_buffer(ia);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += g[c * n + r];
                     });
}

Var softmax(const Var& x, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
  if (x.value().rank() > 2 || x.size() == 0)
    throw DimensionError("softmax expects a non-empty vector or matrix");
  const std::size_t width = x.value().rank() == 0 ? 1 : x.shape().back();
  const std::size_t rows = x.size() / width;
  auto& tape = tape_of(x);
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * width;
    double* o = out.data() + r * width;
    const double mx = *std::max_element(in, in + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp((in[j] - mx) / temperature);
      z += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= z;
  }
  return tape.record("softmax", std::move(out), {x},
                     [ix = x.id(), self = tape.size(), rows, width, temperature](
                         Tape& t, std::span<const double> g) {
                       const auto& y = t.value(self);
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t o = r * width;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < width; ++j) dot += g[o + j] * y[o + j];
                         for (std::size_t j = 0; j < width; ++j)
                           gx[o + j] += y[o + j] * (g[o + j] - dot) / temperature;
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const std::size_t m = parts[0].shape().at(1);
  std::size_t n = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_rank("concat_rows", p, 2);
    if (p.shape()[1] != m) throw DimensionError("concat_rows: row widths differ");
    offsets.push_back(n * m);
    n += p.shape()[0];
    ids.push_back(p.id());
  }
  auto& tape = tape_of(parts[0]);
  Tensor out({n, m});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    std::copy(v.values().begin(), v.values().end(), out.data() + offsets[k]);
  }
  return tape.record("concat_rows", std::move(out), parts,
                     [ids, offsets](Tape& t, std::span<const double> g) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         auto gx = t.grad_buffer(ids[k]);
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[offsets[k] + i];
                       }
                     });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t n = parts[0].shape().at(0);
  std::size_t m = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> offsets, widths;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.shape()[0] != n) throw DimensionError("concat_cols: row counts differ");
    offsets.push_back(m);
    widths.push_back(p.shape()[1]);
    m += p.shape()[1];
    ids.push_back(p.id());
  }
  auto& tape = tape_of(parts[0]);
  Tensor out({n, m});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c)
        out[r * m + offsets[k] + c] = v[r * widths[k] + c];
  }
  return tape.record("concat_cols", std::move(out), parts,
                     [ids, offsets, widths, n, m](Tape& t, std::span<const double> g) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         auto gx = t.grad_buffer(ids[k]);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < widths[k]; ++c)
                             gx[r * widths[k] + c] += g[r * m + offsets[k] + c];
                       }
                     });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  for (auto r : rows)
    if (r >= n) throw DimensionError("gather_rows: row index out of range");
  auto& tape = tape_of(x);
  Tensor out({rows.size(), m});
  const auto& xv = x.value();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.data() + rows[i] * m, m, out.data() + i * m);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record("gather_rows", std::move(out), {x},
                     [ix = x.id(), idx, m](Tape& t, std::span<const double> g) {
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t c = 0; c < m; ++c) gx[idx[i] * m + c] += g[i * m + c];
                     });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
  require_rank("slice_cols", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (begin + count > m) throw DimensionError("slice_cols: range exceeds width");
  auto& tape = tape_of(x);
  Tensor out({n, count});
  const auto& xv = x.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = xv[r * m + begin + c];
  return tape.record("slice_cols", std::move(out), {x},
                     [ix = x.id(), n, m, begin, count](Tape& t, std::span<const double> g) {
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < count; ++c)
                           gx[r * m + begin + c] += g[r * count + c];
                     });
}

Var reshape(const Var& x, Shape shape) {
  if (element_count(shape) != x.size())
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  auto& tape = tape_of(x);
  Tensor out(std::move(shape), std::vector<double>(x.value().values().begin(),
                                                   x.value().values().end()));
  return tape.record("reshape", std::move(out), {x},
                     [ix = x.id()](Tape& t, std::span<const double> g) {
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Var row_l2_normalize(const Var& x) {
  require_rank("row_l2_normalize", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  auto& tape = tape_of(x);
  Tensor out({n, m});
  std::vector<double> norms(n);
  const auto& xv = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += xv[r * m + c] * xv[r * m + c];
    norms[r] = std::sqrt(s);
    if (norms[r] > 0.0)
      for (std::size_t c = 0; c < m; ++c) out[r * m + c] = xv[r * m + c] / norms[r];
  }
  return tape.record("row_l2_normalize", std::move(out), {x},
                     [ix = x.id(), self = tape.size(), norms, n, m](Tape& t,
                                                                   std::span<const double> g) {
                       const auto& y = t.value(self);
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < n; ++r) {
                         if (norms[r] == 0.0) continue;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
                         for (std::size_t c = 0; c < m; ++c)
                           gx[r * m + c] += (g[r * m + c] - dot * y[r * m + c]) / norms[r];
                       }
                     });
}

Var row_norm(const Var& x) {
  require_rank("row_norm", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  auto& tape = tape_of(x);
  Tensor out({n, 1});
  const auto& xv = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += xv[r * m + c] * xv[r * m + c];
    out[r] = std::sqrt(s);
  }
  return tape.record("row_norm", std::move(out), {x},
                     [ix = x.id(), self = tape.size(), n, m](Tape& t, std::span<const double> g) {
                       const auto& y = t.value(self);
                       const auto& xv = t.value(ix);
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < n; ++r) {
                         if (y[r] == 0.0) continue;
                         for (std::size_t c = 0; c < m; ++c)
                           gx[r * m + c] += g[r] * xv[r * m + c] / y[r];
                       }
                     });
}

Var center_rows(const Var& x) {
  require_rank("center_rows", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += out[r * m + c];
    s /= static_cast<double>(m);
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] -= s;
  }
  return tape.record("center_rows", std::move(out), {x},
                     [ix = x.id(), n, m](Tape& t, std::span<const double> g) {
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < n; ++r) {
                         double s = 0.0;
                         for (std::size_t c = 0; c < m; ++c) s += g[r * m + c];
                         s /= static_cast<double>(m);
                         for (std::size_t c = 0; c < m; ++c) gx[r * m + c] += g[r * m + c] - s;
                       }
                     });
}

std::size_t fourier_width(std::size_t dim, std::size_t bands) { return dim * (1 + 2 * bands); }

Var fourier_features(const Var& x, std::size_t bands) {
  require_rank("fourier_features", x, 2);
  const std::size_t n = x.shape()[0], dim = x.shape()[1];
  const std::size_t width = fourier_width(dim, bands);
  auto& tape = tape_of(x);
  Tensor out({n, width});
  const auto& xv = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    double* o = out.data() + r * width;
    for (std::size_t i = 0; i < dim; ++i) o[i] = xv[r * dim + i];
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < bands; ++j) {
        const double freq = std::ldexp(std::numbers::pi, static_cast<int>(j));
        const double a = freq * xv[r * dim + i];
        o[dim + (i * bands + j) * 2] = std::sin(a);
        o[dim + (i * bands + j) * 2 + 1] = std::cos(a);
      }
    }
  }
  return tape.record(
      "fourier_features", std::move(out), {x},
      [ix = x.id(), self = tape.size(), n, dim, bands, width](Tape& t,
                                                              std::span<const double> g) {
        const auto& y = t.value(self);
        auto gx = t.grad_buffer(ix);
        for (std::size_t r = 0; r < n; ++r) {
          const double* gr = g.data() + r * width;
          const double* yr = y.data() + r * width;
          for (std::size_t i = 0; i < dim; ++i) {
            double acc = gr[i];
            for (std::size_t j = 0; j < bands; ++j) {
              const double freq = std::ldexp(std::numbers::pi, static_cast<int>(j));
              const std::size_t o = dim + (i * bands + j) * 2;
              acc += gr[o] * freq * yr[o + 1] - gr[o + 1] * freq * yr[o];
            }
            gx[r * dim + i] += acc;
          }
        }
      });
}

Var graph_attention(const Var& queries, const Var& keys, const Var& values,
                    const std::vector<std::vector<std::size_t>>& neighbors, double scale) {
  require_rank("graph_attention", queries, 2);
  require_same_shape("graph_attention", keys, values);
  const std::size_t rows = queries.shape()[0], c = queries.shape()[1];
  const std::size_t m = keys.shape()[0];
  if (keys.shape()[1] != c) throw DimensionError("graph_attention: key width differs");
  if (neighbors.size() != rows)
    throw DimensionError("graph_attention: neighbour lists do not match query rows");
  for (const auto& list : neighbors)
    for (auto j : list)
      if (j >= m) throw DimensionError("graph_attention: neighbour index out of range");

  auto& tape = tape_of(queries);
  const auto& q = queries.value();
  const auto& k = keys.value();
  const auto& v = values.value();
  Tensor out({rows, c});
  std::vector<std::vector<double>> alpha(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& list = neighbors[r];
    if (list.empty()) continue;
    auto& a = alpha[r];
    a.resize(list.size());
    const double* qr = q.data() + r * c;
    for (std::size_t s = 0; s < list.size(); ++s) {
      const double* kr = k.data() + list[s] * c;
      double dot = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) dot += qr[ch] * kr[ch];
      a[s] = scale * dot;
    }
    const double mx = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    for (auto& x : a) {
      x = std::exp(x - mx);
      z += x;
    }
    for (auto& x : a) x /= z;
    double* o = out.data() + r * c;
    for (std::size_t s = 0; s < list.size(); ++s)
      simd::kernels().axpy(a[s], v.data() + list[s] * c, o, c);
  }
  return tape.record(
      "graph_attention", std::move(out), {queries, keys, values},
      [iq = queries.id(), ik = keys.id(), iv = values.id(), neighbors, alpha, rows, c,
       scale](Tape& t, std::span<const double> g) {
        const auto& q = t.value(iq);
        const auto& k = t.value(ik);
        const auto& v = t.value(iv);
        const bool gq_on = t.requires_grad(iq), gk_on = t.requires_grad(ik),
                   gv_on = t.requires_grad(iv);
        std::span<double> gq, gk, gv;
        if (gq_on) gq = t.grad_buffer(iq);
        if (gk_on) gk = t.grad_buffer(ik);
        if (gv_on) gv = t.grad_buffer(iv);
        std::vector<double> dalpha;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto& list = neighbors[r];
          if (list.empty()) continue;
          const auto& a = alpha[r];
          const double* gr = g.data() + r * c;
          dalpha.assign(list.size(), 0.0);
          double mix = 0.0;
          for (std::size_t s = 0; s < list.size(); ++s) {
            const double* vr = v.data() + list[s] * c;
            double d = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) d += gr[ch] * vr[ch];
            dalpha[s] = d;
            mix += a[s] * d;
            if (gv_on) simd::kernels().axpy(a[s], gr, gv.data() + list[s] * c, c);
          }
          for (std::size_t s = 0; s < list.size(); ++s) {
            const double ds = a[s] * (dalpha[s] - mix) * scale;
            if (ds == 0.0) continue;
            if (gq_on) simd::kernels().axpy(ds, k.data() + list[s] * c, gq.data() + r * c, c);
            if (gk_on) simd::kernels().axpy(ds, q.data() + r * c, gk.data() + list[s] * c, c);
          }
        }
      });
}

Var guarded_reciprocal(const Var& x, double numerator, double floor) {
  if (!(floor > 0.0)) throw ParameterError("guarded_reciprocal floor must be positive");
  return unary(
      "guarded_reciprocal", x,
      [numerator, floor](double d) { return numerator / std::max(d, floor); },
      [numerator, floor](double d, double) {
        return d < floor ? 0.0 : -numerator / (d * d);
      });
}

Var affine_cols(const Var& x, std::vector<double> scale, std::vector<double> shift) {
  require_rank("affine_cols", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (scale.size() != m || shift.size() != m)
    throw DimensionError("affine_cols: coefficient count differs from row width");
  auto& tape = tape_of(x);
  Tensor out = x.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = out[r * m + c] * scale[c] + shift[c];
  return tape.record("affine_cols", std::move(out), {x},
                     [ix = x.id(), scale = std::move(scale), n, m](Tape& t,
                                                                   std::span<const double> g) {
                       auto gx = t.grad_buffer(ix);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < m; ++c) gx[r * m + c] += g[r * m + c] * scale[c];
                     });
}

Var scale_rows(const Var& x, const Var& s) {
  require_rank("scale_rows", x, 2);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (s.size() != n) throw DimensionError("scale_rows: factor count differs from row count");
  auto& tape = tape_of(x);
  Tensor out = x.value();
  const auto& sv = s.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] *= sv[r];
  return tape.record("scale_rows", std::move(out), {x, s},
                     [ix = x.id(), is = s.id(), n, m](Tape& t, std::span<const double> g) {
                       const auto& xv = t.value(ix);
                       const auto& sv = t.value(is);
                       if (t.requires_grad(ix)) {
                         auto gx = t.grad_buffer(ix);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < m; ++c) gx[r * m + c] += g[r * m + c] * sv[r];
                       }
                       if (t.requires_grad(is)) {
                         auto gs = t.grad_buffer(is);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < m; ++c) gs[r] += g[r * m + c] * xv[r * m + c];
                       }
                     });
}

}  // namespace sendd::ad
