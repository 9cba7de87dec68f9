// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/autodiff/ops_image.hpp"

#include <algorithm>
#include <cmath>

#include "sendd/errors.hpp"
#include "sendd/simd/kernels.hpp"

namespace sendd::ad {
namespace {

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw ContractError("operation on an empty Var");
  return *v.tape();
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Sums over every w x w window fully inside src[h,w_]: out[(h-w+1),(w_-w+1)].
std::vector<double> box_valid(const double* src, std::size_t h, std::size_t wd, std::size_t w) {
  const auto& k = simd::kernels();
  const std::size_t oh = h - w + 1, ow = wd - w + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y) k.window_sum_row(src + y * wd, ow, w, rows.data() + y * ow);
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) k.column_sum(rows.data() + y * ow, ow, w, ow, out.data() + y * ow);
  return out;
}

// Adjoint of box_valid: out[h,wd] where each pixel sums the window values whose
// window covers it.
std::vector<double> box_adjoint(const std::vector<double>& win, std::size_t h, std::size_t wd,
                                std::size_t w) {
  const std::size_t oh = h - w + 1, ow = wd - w + 1;
  const std::size_t ph = oh + 2 * (w - 1), pw = ow + 2 * (w - 1);
  std::vector<double> padded(ph * pw, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    std::copy_n(win.data() + y * ow, ow, padded.data() + (y + w - 1) * pw + (w - 1));
  return box_valid(padded.data(), ph, pw, w);
}

struct ImageDims {
  std::size_t h, w, c;
};

ImageDims image_dims(const char* op, const Var& v) {
  const auto& s = v.shape();
  if (s.size() == 2) return {s[0], s[1], 1};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  throw DimensionError(std::string(op) + ": expected [H,W] or [H,W,C], got " + shape_string(s));
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || ws[2] % 2 == 0)
    throw DimensionError("conv2d: input " + shape_string(xs) + " weight " + shape_string(ws));
  if (b.size() != ws[0]) throw DimensionError("conv2d: bias length differs from output channels");
  const std::size_t cin = xs[0], h = xs[1], wd = xs[2], cout = ws[0], ks = ws[2];
  const long pad = static_cast<long>(ks / 2);
  auto& tape = tape_of(x);
  const auto& kern = simd::kernels();
  const auto& xv = x.value();
  const auto& wv = w.value();
  Tensor out({cout, h, wd});

  // Valid destination column range for a horizontal tap offset.
  auto col_range = [wd](long off, std::size_t& x0, std::size_t& len) {
    const long lo = std::max(0L, -off);
    const long hi = std::min(static_cast<long>(wd), static_cast<long>(wd) - off);
    x0 = static_cast<std::size_t>(lo);
    len = hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
  };

  for (std::size_t co = 0; co < cout; ++co) {
    double* o = out.data() + co * h * wd;
    std::fill(o, o + h * wd, b.value()[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < ks; ++ky) {
        const long dy = static_cast<long>(ky) - pad;
        for (std::size_t kx = 0; kx < ks; ++kx) {
          const long dx = static_cast<long>(kx) - pad;
          const double wt = wv[((co * cin + ci) * ks + ky) * ks + kx];
          std::size_t x0, len;
          col_range(dx, x0, len);
          if (len == 0) continue;
          for (std::size_t y = 0; y < h; ++y) {
            const long sy = static_cast<long>(y) + dy;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            const double* src = xv.data() + (ci * h + static_cast<std::size_t>(sy)) * wd +
                                static_cast<std::size_t>(static_cast<long>(x0) + dx);
            kern.axpy(wt, src, o + y * wd + x0, len);
          }
        }
      }
    }
  }

  return tape.record(
      "conv2d", std::move(out), {x, w, b},
      [ix = x.id(), iw = w.id(), ib = b.id(), cin, h, wd, cout, ks, pad, col_range](
          Tape& t, std::span<const double> g) {
        const auto& kern = simd::kernels();
        const auto& xv = t.value(ix);
        const auto& wv = t.value(iw);
        const bool gx_on = t.requires_grad(ix), gw_on = t.requires_grad(iw);
        std::span<double> gx, gw;
        if (gx_on) gx = t.grad_buffer(ix);
        if (gw_on) gw = t.grad_buffer(iw);
        if (t.requires_grad(ib)) {
          auto gb = t.grad_buffer(ib);
          for (std::size_t co = 0; co < cout; ++co) {
            double s = 0.0;
            for (std::size_t i = 0; i < h * wd; ++i) s += g[co * h * wd + i];
            gb[co] += s;
          }
        }
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g.data() + co * h * wd;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t ky = 0; ky < ks; ++ky) {
              const long dy = static_cast<long>(ky) - pad;
              for (std::size_t kx = 0; kx < ks; ++kx) {
                const long dx = static_cast<long>(kx) - pad;
                const std::size_t widx = ((co * cin + ci) * ks + ky) * ks + kx;
                std::size_t x0, len;
                col_range(dx, x0, len);
                if (len == 0) continue;
                double acc = 0.0;
                for (std::size_t y = 0; y < h; ++y) {
                  const long sy = static_cast<long>(y) + dy;
                  if (sy < 0 || sy >= static_cast<long>(h)) continue;
                  const std::size_t soff = (ci * h + static_cast<std::size_t>(sy)) * wd +
                                           static_cast<std::size_t>(static_cast<long>(x0) + dx);
                  const double* grow = go + y * wd + x0;
                  if (gx_on) kern.axpy(wv[widx], grow, gx.data() + soff, len);
                  if (gw_on) {
                    const double* src = xv.data() + soff;
                    for (std::size_t i = 0; i < len; ++i) acc += grow[i] * src[i];
                  }
                }
                if (gw_on) gw[widx] += acc;
              }
            }
          }
        }
      });
}

Var cell_soft_argmax(const Var& logits, std::size_t cell, double temperature,
                     std::size_t radius) {
  if (!(temperature > 0.0)) throw ParameterError("soft-argmax temperature must be positive");
  const auto& s = logits.shape();
  if (s.size() != 2 || cell == 0 || s[0] % cell || s[1] % cell)
    throw DimensionError("cell_soft_argmax: logits " + shape_string(s) +
                         " not divisible into cells of " + std::to_string(cell));
  const std::size_t h = s[0], w = s[1], ty = h / cell, tx = w / cell;
  auto& tape = tape_of(logits);
  const auto& lv = logits.value();
  Tensor out({ty * tx, 2});
  std::vector<double> probs(h * w, 0.0);
  for (std::size_t cy = 0; cy < ty; ++cy) {
    for (std::size_t cx = 0; cx < tx; ++cx) {
      double mx = -INFINITY;
      std::size_t bx = 0, by = 0;
      for (std::size_t y = 0; y < cell; ++y)
        for (std::size_t x = 0; x < cell; ++x)
          if (lv[(cy * cell + y) * w + cx * cell + x] > mx) {
            mx = lv[(cy * cell + y) * w + cx * cell + x];
            bx = x;
            by = y;
          }
      // Window around the cell maximum, clipped to the cell.
      std::size_t x0 = 0, x1 = cell, y0 = 0, y1 = cell;
      if (radius > 0) {
        x0 = bx > radius ? bx - radius : 0;
        y0 = by > radius ? by - radius : 0;
        x1 = std::min(cell, bx + radius + 1);
        y1 = std::min(cell, by + radius + 1);
      }
      double z = 0.0, su = 0.0, sv = 0.0;
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
          const std::size_t idx = (cy * cell + y) * w + cx * cell + x;
          const double p = std::exp((lv[idx] - mx) / temperature);
          probs[idx] = p;
          z += p;
        }
      }
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
          const std::size_t idx = (cy * cell + y) * w + cx * cell + x;
          probs[idx] /= z;
          su += probs[idx] * static_cast<double>(cx * cell + x);
          sv += probs[idx] * static_cast<double>(cy * cell + y);
        }
      }
      out[(cy * tx + cx) * 2] = su;
      out[(cy * tx + cx) * 2 + 1] = sv;
    }
  }
  return tape.record("cell_soft_argmax", std::move(out), {logits},
                     [il = logits.id(), self = tape.size(), probs, cell, w, ty, tx,
                      temperature](Tape& t, std::span<const double> g) {
                       const auto& pos = t.value(self);
                       auto gl = t.grad_buffer(il);
                       for (std::size_t cy = 0; cy < ty; ++cy) {
                         for (std::size_t cx = 0; cx < tx; ++cx) {
                           const std::size_t k = cy * tx + cx;
                           const double gu = g[2 * k], gv = g[2 * k + 1];
                           const double u = pos[2 * k], v = pos[2 * k + 1];
                           for (std::size_t y = 0; y < cell; ++y) {
                             for (std::size_t x = 0; x < cell; ++x) {
                               const std::size_t px = cx * cell + x, py = cy * cell + y;
                               const std::size_t idx = py * w + px;
                               gl[idx] += probs[idx] *
                                          (gu * (static_cast<double>(px) - u) +
                                           gv * (static_cast<double>(py) - v)) /
                                          temperature;
                             }
                           }
                         }
                       }
                     });
}

Var bilinear_sample(const Var& src, const Var& coords, std::vector<bool>* valid) {
  const auto dims = image_dims("bilinear_sample", src);
  const auto& cs = coords.shape();
  if (cs.size() != 2 || cs[1] != 2)
    throw DimensionError("bilinear_sample: coords must be [P,2], got " + shape_string(cs));
  if (dims.h < 2 || dims.w < 2) throw DimensionError("bilinear_sample: image smaller than 2x2");
  const std::size_t np = cs[0], h = dims.h, w = dims.w, c = dims.c;
  auto& tape = tape_of(src);
  const auto& sv = src.value();
  const auto& cv = coords.value();
  Shape out_shape = src.value().rank() == 3 ? Shape{np, c} : Shape{np};
  Tensor out(out_shape);
  std::vector<bool> ok(np, false);
  for (std::size_t i = 0; i < np; ++i) {
    const double x = cv[2 * i], y = cv[2 * i + 1];
    if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(w - 1) &&
          y <= static_cast<double>(h - 1)))
      continue;
    ok[i] = true;
    const std::size_t x0 = std::min(static_cast<std::size_t>(x), w - 2);
    const std::size_t y0 = std::min(static_cast<std::size_t>(y), h - 2);
    const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double v00 = sv[(y0 * w + x0) * c + ch], v01 = sv[(y0 * w + x0 + 1) * c + ch];
      const double v10 = sv[((y0 + 1) * w + x0) * c + ch],
                   v11 = sv[((y0 + 1) * w + x0 + 1) * c + ch];
      out[i * c + ch] = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
    }
  }
  if (valid) *valid = ok;
  return tape.record(
      "bilinear_sample", std::move(out), {src, coords},
      [is = src.id(), ic = coords.id(), ok, np, h, w, c](Tape& t, std::span<const double> g) {
        const auto& sv = t.value(is);
        const auto& cv = t.value(ic);
        const bool gs_on = t.requires_grad(is), gc_on = t.requires_grad(ic);
        std::span<double> gs, gc;
        if (gs_on) gs = t.grad_buffer(is);
        if (gc_on) gc = t.grad_buffer(ic);
        for (std::size_t i = 0; i < np; ++i) {
          if (!ok[i]) continue;
          const double x = cv[2 * i], y = cv[2 * i + 1];
          const std::size_t x0 = std::min(static_cast<std::size_t>(x), w - 2);
          const std::size_t y0 = std::min(static_cast<std::size_t>(y), h - 2);
          const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double gi = g[i * c + ch];
            if (gi == 0.0) continue;
            const std::size_t i00 = (y0 * w + x0) * c + ch, i01 = (y0 * w + x0 + 1) * c + ch;
            const std::size_t i10 = ((y0 + 1) * w + x0) * c + ch,
                              i11 = ((y0 + 1) * w + x0 + 1) * c + ch;
            if (gs_on) {
              gs[i00] += gi * (1 - fx) * (1 - fy);
              gs[i01] += gi * fx * (1 - fy);
              gs[i10] += gi * (1 - fx) * fy;
              gs[i11] += gi * fx * fy;
            }
            if (gc_on) {
              gc[2 * i] += gi * ((1 - fy) * (sv[i01] - sv[i00]) + fy * (sv[i11] - sv[i10]));
              gc[2 * i + 1] += gi * ((1 - fx) * (sv[i10] - sv[i00]) + fx * (sv[i11] - sv[i01]));
            }
          }
        }
      });
}

Var upsample_grid(const Var& grid, std::size_t height, std::size_t width, double stride,
                  double offset) {
  const auto dims = image_dims("upsample_grid", grid);
  if (!(stride > 0.0)) throw ParameterError("upsample_grid stride must be positive");
  const std::size_t gh = dims.h, gw = dims.w, c = dims.c;
  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [stride, offset](std::size_t n, std::size_t gn) {
    std::vector<Tap> out(n);
    for (std::size_t p = 0; p < n; ++p) {
      double gcoord = (static_cast<double>(p) - offset) / stride;
      gcoord = std::clamp(gcoord, 0.0, static_cast<double>(gn - 1));
      const std::size_t i0 = std::min(static_cast<std::size_t>(gcoord), gn > 1 ? gn - 2 : 0);
      const std::size_t i1 = std::min(i0 + 1, gn - 1);
      out[p] = {i0, i1, gcoord - static_cast<double>(i0)};
    }
    return out;
  };
  auto tx = taps(width, gw);
  auto ty = taps(height, gh);
  auto& tape = tape_of(grid);
  const auto& gv = grid.value();
  Shape shape = grid.value().rank() == 3 ? Shape{height, width, c} : Shape{height, width};
  Tensor out(shape);
  for (std::size_t y = 0; y < height; ++y) {
    const auto& a = ty[y];
    for (std::size_t x = 0; x < width; ++x) {
      const auto& b = tx[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = gv[(a.i0 * gw + b.i0) * c + ch], v01 = gv[(a.i0 * gw + b.i1) * c + ch];
        const double v10 = gv[(a.i1 * gw + b.i0) * c + ch], v11 = gv[(a.i1 * gw + b.i1) * c + ch];
        out[(y * width + x) * c + ch] =
            (1 - a.f) * ((1 - b.f) * v00 + b.f * v01) + a.f * ((1 - b.f) * v10 + b.f * v11);
      }
    }
  }
  return tape.record("upsample_grid", std::move(out), {grid},
                     [ig = grid.id(), tx, ty, gw, c, height, width](Tape& t,
                                                                   std::span<const double> g) {
                       auto gg = t.grad_buffer(ig);
                       for (std::size_t y = 0; y < height; ++y) {
                         const auto& a = ty[y];
                         for (std::size_t x = 0; x < width; ++x) {
                           const auto& b = tx[x];
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             const double gi = g[(y * width + x) * c + ch];
                             gg[(a.i0 * gw + b.i0) * c + ch] += gi * (1 - a.f) * (1 - b.f);
                             gg[(a.i0 * gw + b.i1) * c + ch] += gi * (1 - a.f) * b.f;
                             gg[(a.i1 * gw + b.i0) * c + ch] += gi * a.f * (1 - b.f);
                             gg[(a.i1 * gw + b.i1) * c + ch] += gi * a.f * b.f;
                           }
                         }
                       }
                     });
}

Var ssim_mean(const Var& a, const Var& b, const std::vector<bool>& mask, std::size_t window) {
  if (a.shape() != b.shape()) throw DimensionError("ssim: image shapes differ");
  if (a.value().rank() != 2) throw DimensionError("ssim: expects single-channel [H,W] images");
  if (window == 0 || window % 2 == 0) throw ParameterError("ssim window must be odd");
  const std::size_t h = a.shape()[0], w = a.shape()[1];
  if (h < window || w < window) throw DimensionError("ssim: image smaller than the window");
  if (mask.size() != h * w) throw DimensionError("ssim: mask size differs from image");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double n = static_cast<double>(window * window);
  const std::size_t oh = h - window + 1, ow = w - window + 1;

  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> invalid(h * w), aa(h * w), bb(h * w), ab(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    invalid[i] = mask[i] ? 0.0 : 1.0;
    aa[i] = av[i] * av[i];
    bb[i] = bv[i] * bv[i];
    ab[i] = av[i] * bv[i];
  }
  const auto bad = box_valid(invalid.data(), h, w, window);
  const auto sa = box_valid(av.data(), h, w, window);
  const auto sb = box_valid(bv.data(), h, w, window);
  const auto saa = box_valid(aa.data(), h, w, window);
  const auto sbb = box_valid(bb.data(), h, w, window);
  const auto sab = box_valid(ab.data(), h, w, window);

  // Per-window partial derivatives of SSIM, folded into coefficients of 1, a_p, b_p.
  std::vector<double> coef_a1(oh * ow, 0.0), coef_aa(oh * ow, 0.0), coef_ab(oh * ow, 0.0);
  std::vector<double> coef_b1(oh * ow, 0.0), coef_bb(oh * ow, 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < oh * ow; ++i) {
    if (bad[i] != 0.0) continue;
    const double ma = sa[i] / n, mb = sb[i] / n;
    const double va = saa[i] / n - ma * ma, vb = sbb[i] / n - mb * mb;
    const double cov = sab[i] / n - ma * mb;
    const double n1 = 2 * ma * mb + c1, n2 = 2 * cov + c2;
    const double d1 = ma * ma + mb * mb + c1, d2 = va + vb + c2;
    const double s = n1 * n2 / (d1 * d2);
    total += s;
    ++count;
    const double ds_dma = 2 * mb * n2 / (d1 * d2) - s * 2 * ma / d1;
    const double ds_dmb = 2 * ma * n2 / (d1 * d2) - s * 2 * mb / d1;
    const double ds_dv = -s / d2;
    const double ds_dcov = 2 * n1 / (d1 * d2);
    // d/da_p: ds_dma/n + ds_dv*(2 a_p - 2 ma)/n + ds_dcov*(b_p - mb)/n
    coef_a1[i] = (ds_dma - 2 * ma * ds_dv - mb * ds_dcov) / n;
    coef_aa[i] = 2 * ds_dv / n;
    coef_ab[i] = ds_dcov / n;
    coef_b1[i] = (ds_dmb - 2 * mb * ds_dv - ma * ds_dcov) / n;
    coef_bb[i] = 2 * ds_dv / n;
  }
  if (count == 0) throw ContractError("ssim: no fully valid window under the mask");
  auto& tape = tape_of(a);
  const double inv = 1.0 / static_cast<double>(count);
  return tape.record(
      "ssim_mean", Tensor::scalar(total / static_cast<double>(count)), {a, b},
      [ia = a.id(), ib = b.id(), h, w, window, inv, coef_a1, coef_aa, coef_ab, coef_b1,
       coef_bb](Tape& t, std::span<const double> g) {
        const double scale = g[0] * inv;
        const auto& av = t.value(ia);
        const auto& bv = t.value(ib);
        if (t.requires_grad(ia)) {
          const auto p1 = box_adjoint(coef_a1, h, w, window);
          const auto pa = box_adjoint(coef_aa, h, w, window);
          const auto pb = box_adjoint(coef_ab, h, w, window);
          auto ga = t.grad_buffer(ia);
          for (std::size_t i = 0; i < h * w; ++i)
            ga[i] += scale * (p1[i] + pa[i] * av[i] + pb[i] * bv[i]);
        }
        if (t.requires_grad(ib)) {
          const auto p1 = box_adjoint(coef_b1, h, w, window);
          const auto pb = box_adjoint(coef_bb, h, w, window);
          const auto pa = box_adjoint(coef_ab, h, w, window);
          auto gb = t.grad_buffer(ib);
          for (std::size_t i = 0; i < h * w; ++i)
            gb[i] += scale * (p1[i] + pb[i] * bv[i] + pa[i] * av[i]);
        }
      });
}

Var masked_l1_mean(const Var& a, const Var& b, const std::vector<bool>& mask) {
  if (a.shape() != b.shape()) throw DimensionError("masked_l1_mean: shapes differ");
  const std::size_t n = a.size();
  if (mask.empty() || n % mask.size()) throw DimensionError("masked_l1_mean: mask size");
  const std::size_t c = n / mask.size();
  const auto& av = a.value();
  const auto& bv = b.value();
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (std::size_t ch = 0; ch < c; ++ch) s += std::abs(av[p * c + ch] - bv[p * c + ch]);
    count += c;
  }
  if (count == 0) throw ContractError("masked_l1_mean: empty mask");
  const double inv = 1.0 / static_cast<double>(count);
  return tape_of(a).record(
      "masked_l1_mean", Tensor::scalar(s * inv), {a, b},
      [ia = a.id(), ib = b.id(), mask, c, inv](Tape& t, std::span<const double> g) {
        const auto& av = t.value(ia);
        const auto& bv = t.value(ib);
        const bool ga_on = t.requires_grad(ia), gb_on = t.requires_grad(ib);
        std::span<double> ga, gb;
        if (ga_on) ga = t.grad_buffer(ia);
        if (gb_on) gb = t.grad_buffer(ib);
        for (std::size_t p = 0; p < mask.size(); ++p) {
          if (!mask[p]) continue;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            const double d = g[0] * inv * sign(av[i] - bv[i]);
            if (ga_on) ga[i] += d;
            if (gb_on) gb[i] -= d;
          }
        }
      });
}

Var edge_aware_smoothness(const Var& v, const std::vector<double>& wx,
                          const std::vector<double>& wy) {
  const auto dims = image_dims("edge_aware_smoothness", v);
  const std::size_t h = dims.h, w = dims.w, c = dims.c;
  if (h < 2 || w < 2) throw DimensionError("edge_aware_smoothness: grid smaller than 2x2");
  if (wx.size() != h * w || wy.size() != h * w)
    throw DimensionError("edge_aware_smoothness: weight grid size differs");
  const auto& vv = v.value();
  double s = 0.0;
  for (std::size_t y = 0; y + 1 < h; ++y) {
    for (std::size_t x = 0; x + 1 < w; ++x) {
      const std::size_t p = y * w + x;
      double dx = 0.0, dy = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        dx += std::abs(vv[(p + 1) * c + ch] - vv[p * c + ch]);
        dy += std::abs(vv[(p + w) * c + ch] - vv[p * c + ch]);
      }
      s += wx[p] * dx + wy[p] * dy;
    }
  }
  const double inv = 1.0 / static_cast<double>((h - 1) * (w - 1));
  return tape_of(v).record(
      "edge_aware_smoothness", Tensor::scalar(s * inv), {v},
      [iv = v.id(), wx, wy, h, w, c, inv](Tape& t, std::span<const double> g) {
        const auto& vv = t.value(iv);
        auto gv = t.grad_buffer(iv);
        for (std::size_t y = 0; y + 1 < h; ++y) {
          for (std::size_t x = 0; x + 1 < w; ++x) {
            const std::size_t p = y * w + x;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double sx = g[0] * inv * wx[p] * sign(vv[(p + 1) * c + ch] - vv[p * c + ch]);
              const double sy = g[0] * inv * wy[p] * sign(vv[(p + w) * c + ch] - vv[p * c + ch]);
              gv[(p + 1) * c + ch] += sx;
              gv[p * c + ch] -= sx;
              gv[(p + w) * c + ch] += sy;
              gv[p * c + ch] -= sy;
            }
          }
        }
      });
}

}  // namespace sendd::ad
