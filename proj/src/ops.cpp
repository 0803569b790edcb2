#include "procan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "procan/errors.hpp"

namespace procan {

namespace {

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw UsageError("operands belong to different graphs");
  return *a.graph;
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) + " differ");
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

// Knuth's error-free addition: s + err == a + b exactly.
inline void two_sum(double a, double b, double& s, double& err) {
  s = a + b;
  const double z = s - a;
  err = (a - (s - z)) + (b - z);
}

// Plain [M×K]·[K×N] accumulate into out (row-major), i-k-j order.
void gemm_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// out += aᵀ·g where a is [M×K], g is [M×N], out is [K×N].
void gemm_at_acc(const double* a, const double* g, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      const double* grow = g + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
}

// out += g·bᵀ where g is [M×N], b is [K×N], out is [M×K].
void gemm_bt_acc(const double* g, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double* grow = g + i * n;
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
}

}  // namespace

double stable_sigmoid(double z) {
  constexpr double hi = 1.0 - 0x1.0p-53;
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av.shape(), bv.shape(), "add");
  Tensor out = av;
  out += bv;
  return g.record(std::move(out), {a.id, b.id}, [](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    if (gi[0]) *gi[0] += go;
    if (gi[1]) *gi[1] += go;
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av.shape(), bv.shape(), "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Graph* gp = &g;
  return g.record(std::move(out), {a.id, b.id},
                  [gp, ia = a.id, ib = b.id](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    const Tensor& x = gp->value(ia);
                    const Tensor& y = gp->value(ib);
                    if (gi[0])
                      for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * y[i];
                    if (gi[1])
                      for (std::size_t i = 0; i < go.size(); ++i) (*gi[1])[i] += go[i] * x[i];
                  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return a.graph->record(std::move(out), {a.id}, [factor](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += factor * go[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->record(Tensor::scalar(s), {a.id}, [](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    for (auto& v : gi[0]->data()) v += go[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph->record(std::move(out), {a.id}, [](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    auto dst = gi[0]->data();
    auto src = go.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  });
}

Var transpose_last2(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2 && av.rank() != 3)
    throw DimensionError("transpose_last2: expected rank 2 or 3, got " + shape_str(av.shape()));
  const std::size_t batch = av.rank() == 3 ? av.dim(0) : 1;
  const std::size_t m = av.dim(av.rank() - 2);
  const std::size_t n = av.dim(av.rank() - 1);
  Shape shape = av.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out(shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[b * m * n + j * m + i] = av[b * m * n + i * n + j];
  return a.graph->record(std::move(out), {a.id}, [batch, m, n](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gi[0])[b * m * n + i * n + j] += go[b * m * n + j * m + i];
  });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) + " by " + shape_str(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  gemm_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  Graph* gp = &g;
  return g.record(std::move(out), {a.id, b.id},
                  [gp, ia = a.id, ib = b.id, m, k, n](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    if (gi[0]) gemm_bt_acc(go.data().data(), gp->value(ib).data().data(), gi[0]->data().data(), m, k, n);
                    if (gi[1]) gemm_at_acc(gp->value(ia).data().data(), go.data().data(), gi[1]->data().data(), m, k, n);
                  });
}

Var bmm(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
    throw DimensionError("bmm: cannot multiply " + shape_str(av.shape()) + " by " + shape_str(bv.shape()));
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s)
    gemm_acc(av.data().data() + s * m * k, bv.data().data() + s * k * n, out.data().data() + s * m * n, m, k, n);
  Graph* gp = &g;
  return g.record(std::move(out), {a.id, b.id},
                  [gp, ia = a.id, ib = b.id, batch, m, k, n](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    const double* ad = gp->value(ia).data().data();
                    const double* bd = gp->value(ib).data().data();
                    for (std::size_t s = 0; s < batch; ++s) {
                      const double* gs = go.data().data() + s * m * n;
                      if (gi[0]) gemm_bt_acc(gs, bd + s * k * n, gi[0]->data().data() + s * m * k, m, k, n);
                      if (gi[1]) gemm_at_acc(ad + s * m * k, gs, gi[1]->data().data() + s * k * n, m, k, n);
                    }
                  });
}

Var attend(Var values, Var weights) {
  Graph& g = graph_of(values, weights);
  const Tensor& vv = values.value();
  const Tensor& wv = weights.value();
  if (vv.rank() != 3 || wv.rank() != 3 || vv.dim(0) != wv.dim(0) || vv.dim(2) != wv.dim(1) ||
      wv.dim(1) != wv.dim(2))
    throw DimensionError("attend: cannot combine values " + shape_str(vv.shape()) + " with weights " +
                         shape_str(wv.shape()));
  const std::size_t batch = vv.dim(0), c = vv.dim(1), n = vv.dim(2);
  Tensor out({batch, c, n});
  std::vector<double> hi(n), lo(n);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* v = vv.data().data() + s * c * n;
    const double* w = wv.data().data() + s * n * n;
    double* o = out.data().data() + s * c * n;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill(hi.begin(), hi.end(), 0.0);
      std::fill(lo.begin(), lo.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double vi = v[ch * n + i];
        const double* wrow = w + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          double t, e;
          two_sum(hi[j], vi * wrow[j], t, e);
          hi[j] = t;
          lo[j] += e;
        }
      }
      for (std::size_t j = 0; j < n; ++j) o[ch * n + j] = hi[j] + lo[j];
    }
  }
  Graph* gp = &g;
  return g.record(std::move(out), {values.id, weights.id},
                  [gp, iv = values.id, iw = weights.id, batch, c, n](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    const double* vd = gp->value(iv).data().data();
                    const double* wd = gp->value(iw).data().data();
                    for (std::size_t s = 0; s < batch; ++s) {
                      const double* gs = go.data().data() + s * c * n;
                      if (gi[0]) gemm_bt_acc(gs, wd + s * n * n, gi[0]->data().data() + s * c * n, c, n, n);
                      if (gi[1]) gemm_at_acc(vd + s * c * n, gs, gi[1]->data().data() + s * n * n, c, n, n);
                    }
                  });
}

Var conv2d(Var x, Var kernel, std::size_t stride, std::size_t padding) {
  Graph& g = graph_of(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  require_rank(xv.shape(), 4, "conv2d input");
  require_rank(kv.shape(), 4, "conv2d kernel");
  if (stride == 0) throw ConfigError("conv2d stride must be positive");
  if (kv.dim(1) != xv.dim(1))
    throw DimensionError("conv2d: kernel " + shape_str(kv.shape()) + " does not match input " + shape_str(xv.shape()));
  if (kv.dim(2) != kv.dim(3)) throw DimensionError("conv2d: kernel must be square, got " + shape_str(kv.shape()));
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::size_t cout = kv.dim(0), k = kv.dim(2);
  const long hp = static_cast<long>(h + 2 * padding) - static_cast<long>(k);
  const long wp = static_cast<long>(w + 2 * padding) - static_cast<long>(k);
  if (hp < 0 || wp < 0)
    throw DimensionError("conv2d: non-positive output size for input " + shape_str(xv.shape()) + ", kernel " +
                         std::to_string(k) + ", padding " + std::to_string(padding));
  const std::size_t ho = static_cast<std::size_t>(hp) / stride + 1;
  const std::size_t wo = static_cast<std::size_t>(wp) / stride + 1;

  // Valid output range [lo, hi) along one axis for kernel offset `kk`.
  auto range = [stride, padding](std::size_t kk, std::size_t in, std::size_t outn, std::size_t& lo, std::size_t& hi) {
    const long off = static_cast<long>(kk) - static_cast<long>(padding);
    long first = off >= 0 ? 0 : (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    long last = (static_cast<long>(in) - 1 - off);
    last = last < 0 ? -1 : last / static_cast<long>(stride);
    lo = static_cast<std::size_t>(std::max(first, 0L));
    hi = static_cast<std::size_t>(std::clamp(last + 1, 0L, static_cast<long>(outn)));
    if (hi < lo) hi = lo;
  };

  Tensor out({batch, cout, ho, wo});
  const double* xd = xv.data().data();
  const double* kd = kv.data().data();
  double* od = out.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co) {
      double* oplane = od + (b * cout + co) * ho * wo;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xplane = xd + (b * cin + ci) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          std::size_t y0, y1;
          range(ky, h, ho, y0, y1);
          for (std::size_t kx = 0; kx < k; ++kx) {
            std::size_t x0, x1;
            range(kx, w, wo, x0, x1);
            const double wgt = kd[((co * cin + ci) * k + ky) * k + kx];
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const double* xrow = xplane + (oy * stride + ky - padding) * w;
              double* orow = oplane + oy * wo;
              for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wgt * xrow[ox * stride + kx - padding];
            }
          }
        }
      }
    }

  Graph* gp = &g;
  return g.record(
      std::move(out), {x.id, kernel.id},
      [gp, ix = x.id, ik = kernel.id, batch, cin, h, w, cout, k, ho, wo, stride, padding, range](
          const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
        const double* xd = gp->value(ix).data().data();
        const double* kd = gp->value(ik).data().data();
        const double* gd = go.data().data();
        double* gx = gi[0] ? gi[0]->data().data() : nullptr;
        double* gk = gi[1] ? gi[1]->data().data() : nullptr;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gplane = gd + (b * cout + co) * ho * wo;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const std::size_t xoff = (b * cin + ci) * h * w;
              for (std::size_t ky = 0; ky < k; ++ky) {
                std::size_t y0, y1;
                range(ky, h, ho, y0, y1);
                for (std::size_t kx = 0; kx < k; ++kx) {
                  std::size_t x0, x1;
                  range(kx, w, wo, x0, x1);
                  const std::size_t kidx = ((co * cin + ci) * k + ky) * k + kx;
                  const double wgt = kd[kidx];
                  double acc = 0.0;
                  for (std::size_t oy = y0; oy < y1; ++oy) {
                    const std::size_t rowoff = xoff + (oy * stride + ky - padding) * w;
                    const double* grow = gplane + oy * wo;
                    for (std::size_t ox = x0; ox < x1; ++ox) {
                      const std::size_t xi = rowoff + ox * stride + kx - padding;
                      acc += grow[ox] * xd[xi];
                      if (gx) gx[xi] += wgt * grow[ox];
                    }
                  }
                  if (gk) gk[kidx] += acc;
                }
              }
            }
          }
      });
}

Var softmax_rows(Var s) {
  const Tensor& sv = s.value();
  const std::size_t n = sv.dim(sv.rank() - 1);
  const std::size_t rows = sv.size() / n;
  Tensor out(sv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = sv.data().data() + r * n;
    double* o = out.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double hi = 0.0, lo = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      double t, e;
      two_sum(hi, o[j], t, e);
      hi = t;
      lo += e;
    }
    const double total = hi + lo;
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return s.graph->record(std::move(out), {s.id}, [n, rows](const Tensor& y, const Tensor& go, std::vector<Tensor*>& gi) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.data().data() + r * n;
      const double* gr = go.data().data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
      double* dst = gi[0]->data().data() + r * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  Graph* gp = x.graph;
  return gp->record(std::move(out), {x.id}, [gp, ix = x.id](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    const Tensor& xv = gp->value(ix);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (xv[i] > 0.0) (*gi[0])[i] += go[i];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = stable_sigmoid(v);
  return x.graph->record(std::move(out), {x.id}, [](const Tensor& y, const Tensor& go, std::vector<Tensor*>& gi) {
    for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * y[i] * (1.0 - y[i]);
  });
}

Var activation(Var x, Activation kind) { return kind == Activation::Relu ? relu(x) : sigmoid(x); }

Var scale_rows(Var a, Var g) {
  Graph& gr = graph_of(a, g);
  const Tensor& av = a.value();
  const Tensor& gv = g.value();
  if (av.rank() < 2 || gv.rank() != av.rank() || gv.dim(gv.rank() - 1) != 1 ||
      av.size() / av.dim(av.rank() - 1) != gv.size())
    throw DimensionError("scale_rows: cannot scale " + shape_str(av.shape()) + " by " + shape_str(gv.shape()));
  const std::size_t n = av.dim(av.rank() - 1);
  const std::size_t rows = gv.size();
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = av[r * n + j] * gv[r];
  Graph* gp = &gr;
  return gr.record(std::move(out), {a.id, g.id},
                   [gp, ia = a.id, ig = g.id, n, rows](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                     const Tensor& avv = gp->value(ia);
                     const Tensor& gvv = gp->value(ig);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double acc = 0.0;
                       for (std::size_t j = 0; j < n; ++j) {
                         acc += go[r * n + j] * avv[r * n + j];
                         if (gi[0]) (*gi[0])[r * n + j] += go[r * n + j] * gvv[r];
                       }
                       if (gi[1]) (*gi[1])[r] += acc;
                     }
                   });
}

Var batchnorm2d(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  Graph& g = graph_of(x, gamma);
  const Tensor& xv = x.value();
  require_rank(xv.shape(), 4, "batchnorm2d");
  const std::size_t batch = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  if (gamma.value().shape() != Shape{c} || beta.value().shape() != Shape{c} ||
      state.running_mean.shape() != Shape{c})
    throw DimensionError("batchnorm2d: parameters do not match " + std::to_string(c) + " channels");
  if (mode == Mode::Train && batch < 2)
    throw ConfigError("batchnorm2d in train mode needs a batch of at least 2, got " + std::to_string(batch));
  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  const double m = static_cast<double>(batch * hw);

  Tensor xhat(xv.shape());
  Tensor inv_std({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < hw; ++i) s += xv[(b * c + ch) * hw + i];
      mu = s / m;
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = xv[(b * c + ch) * hw + i] - mu;
          ss += d * d;
        }
      var = ss / m;
      const double unbiased = m > 1.0 ? ss / (m - 1.0) : var;
      state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      mu = state.running_mean[ch];
      var = state.running_var[ch];
    }
    inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = (b * c + ch) * hw + i;
        xhat[idx] = (xv[idx] - mu) * inv_std[ch];
      }
  }
  Tensor out(xv.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = (b * c + ch) * hw + i;
        out[idx] = gm[ch] * xhat[idx] + bt[ch];
      }

  Graph* gp = &g;
  const bool train = mode == Mode::Train;
  return g.record(
      std::move(out), {x.id, gamma.id, beta.id},
      [gp, ig = gamma.id, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, c, hw, m, train](
          const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
        const Tensor& gmv = gp->value(ig);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = (b * c + ch) * hw + i;
              sum_g += go[idx];
              sum_gx += go[idx] * xhat[idx];
            }
          if (gi[1]) (*gi[1])[ch] += sum_gx;
          if (gi[2]) (*gi[2])[ch] += sum_g;
          if (!gi[0]) continue;
          const double k = gmv[ch] * inv_std[ch];
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = (b * c + ch) * hw + i;
              if (train)
                (*gi[0])[idx] += k * (go[idx] - sum_g / m - xhat[idx] * sum_gx / m);
              else
                (*gi[0])[idx] += k * go[idx];
            }
        }
      });
}

Var global_avg_pool(Var x) {
  const Tensor& xv = x.value();
  require_rank(xv.shape(), 4, "global_avg_pool");
  const std::size_t batch = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out({batch, c});
  for (std::size_t r = 0; r < batch * c; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += xv[r * hw + i];
    out[r] = s / static_cast<double>(hw);
  }
  return x.graph->record(std::move(out), {x.id}, [batch, c, hw](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t r = 0; r < batch * c; ++r)
      for (std::size_t i = 0; i < hw; ++i) (*gi[0])[r * hw + i] += go[r] * inv;
  });
}

Var dropout(Var x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.value().shape());
  for (auto& v : mask.data()) v = rng.uniform() >= p ? keep_scale : 0.0;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return x.graph->record(std::move(out), {x.id}, [mask = std::move(mask)](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * mask[i];
  });
}

namespace {
Var linear_impl(Graph& g, Var x, Var w, const Var* bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
    throw DimensionError("linear: input " + shape_str(xv.shape()) + " does not match weight " + shape_str(wv.shape()));
  const std::size_t batch = xv.dim(0), f = xv.dim(1), o = wv.dim(0);
  if (bias && bias->value().shape() != Shape{o})
    throw DimensionError("linear: bias " + shape_str(bias->value().shape()) + " does not match " + std::to_string(o) +
                         " outputs");
  Tensor out({batch, o});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < o; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < f; ++i) acc += xv[b * f + i] * wv[j * f + i];
      out[b * o + j] = acc + (bias ? bias->value()[j] : 0.0);
    }
  std::vector<std::size_t> inputs{x.id, w.id};
  if (bias) inputs.push_back(bias->id);
  Graph* gp = &g;
  return g.record(std::move(out), std::move(inputs),
                  [gp, ix = x.id, iw = w.id, batch, f, o](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    const Tensor& xvv = gp->value(ix);
                    const Tensor& wvv = gp->value(iw);
                    for (std::size_t b = 0; b < batch; ++b)
                      for (std::size_t j = 0; j < o; ++j) {
                        const double gg = go[b * o + j];
                        if (gi[0])
                          for (std::size_t i = 0; i < f; ++i) (*gi[0])[b * f + i] += gg * wvv[j * f + i];
                        if (gi[1])
                          for (std::size_t i = 0; i < f; ++i) (*gi[1])[j * f + i] += gg * xvv[b * f + i];
                        if (gi.size() > 2 && gi[2]) (*gi[2])[j] += gg;
                      }
                  });
}
}  // namespace

Var linear(Var x, Var w, Var bias) { return linear_impl(graph_of(x, w), x, w, &bias); }
Var linear(Var x, Var w) { return linear_impl(graph_of(x, w), x, w, nullptr); }

Var bce_loss(Var logits, const Tensor& labels) {
  const Tensor& z = logits.value();
  require_rank(z.shape(), 1, "bce_loss logits");
  require_same(z.shape(), labels.shape(), "bce_loss");
  for (double y : labels.data())
    if (y != 0.0 && y != 1.0) throw DataError("bce_loss labels must be 0 or 1");
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    total += std::max(z[i], 0.0) - z[i] * labels[i] + std::log1p(std::exp(-std::abs(z[i])));
  Graph* gp = logits.graph;
  return gp->record(Tensor::scalar(total / n), {logits.id},
                    [gp, iz = logits.id, labels, n](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                      const Tensor& zv = gp->value(iz);
                      for (std::size_t i = 0; i < zv.size(); ++i)
                        (*gi[0])[i] += go[0] * (stable_sigmoid(zv[i]) - labels[i]) / n;
                    });
}

Var masked_select(Var chosen, Var other, const Tensor& mask) {
  Graph& g = graph_of(chosen, other);
  const Tensor& cv = chosen.value();
  const Tensor& ov = other.value();
  require_same(cv.shape(), ov.shape(), "masked_select");
  require_rank(cv.shape(), 4, "masked_select");
  if (mask.shape() != Shape{cv.dim(2), cv.dim(3)})
    throw DimensionError("masked_select: mask " + shape_str(mask.shape()) + " does not match spatial size of " +
                         shape_str(cv.shape()));
  const std::size_t planes = cv.dim(0) * cv.dim(1), hw = mask.size();
  Tensor out(cv.shape());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = mask[i] != 0.0 ? cv[p * hw + i] : ov[p * hw + i];
  return g.record(std::move(out), {chosen.id, other.id},
                  [mask, planes, hw](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
                    for (std::size_t p = 0; p < planes; ++p)
                      for (std::size_t i = 0; i < hw; ++i) {
                        const bool on = mask[i] != 0.0;
                        if (on && gi[0]) (*gi[0])[p * hw + i] += go[p * hw + i];
                        if (!on && gi[1]) (*gi[1])[p * hw + i] += go[p * hw + i];
                      }
                  });
}

Var lerp(Var a, Var b, double p) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(av.shape(), bv.shape(), "lerp");
  const double q = 1.0 - p;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p * av[i] + q * bv[i];
  return g.record(std::move(out), {a.id, b.id}, [p, q](const Tensor&, const Tensor& go, std::vector<Tensor*>& gi) {
    if (gi[0])
      for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += p * go[i];
    if (gi[1])
      for (std::size_t i = 0; i < go.size(); ++i) (*gi[1])[i] += q * go[i];
  });
}

}  // namespace procan
