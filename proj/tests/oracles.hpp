#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "procan/attention.hpp"
#include "procan/ops.hpp"

// Explicit-loop transcriptions of the attention block, written independently
// of the tensor ops.
namespace procan::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Straight-line transcription of the spatial attention for one sample.
inline Mat oracle_attended(const Mat& x, const Tensor& mq, const Tensor& mk, const Tensor& mv) {
  const std::size_t c = x.size(), n = x[0].size(), cb = mq.dim(0);
  Mat q = zeros(cb, n), k = zeros(cb, n), v = zeros(c, n);
  for (std::size_t z = 0; z < cb; ++z)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < c; ++i) {
        q[z][j] += mq.at(z, i) * x[i][j];
        k[z][j] += mk.at(z, i) * x[i][j];
      }
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < c; ++i) v[o][j] += mv.at(o, i) * x[i][j];
  Mat s = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t z = 0; z < cb; ++z) s[i][j] += q[z][i] * k[z][j];
  Mat b = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = *std::max_element(s[i].begin(), s[i].end()), tot = 0.0;
    for (std::size_t j = 0; j < n; ++j) tot += std::exp(s[i][j] - mx);
    for (std::size_t j = 0; j < n; ++j) b[i][j] = std::exp(s[i][j] - mx) / tot;
  }
  Mat a = zeros(c, n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) a[ch][j] += v[ch][i] * b[i][j];
  return a;
}

inline std::vector<double> oracle_gate(const Mat& x, const Tensor& me) {
  const std::size_t c = x.size(), n = x[0].size();
  std::vector<double> e(n, 0.0), g(c, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < c; ++i) e[j] += me[i] * x[i][j];
  for (std::size_t i = 0; i < c; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += x[i][j] * e[j];
    g[i] = sig(z);
  }
  return g;
}

inline Mat sample(const Tensor& x, std::size_t b) {
  const std::size_t c = x.dim(1), n = x.size() / (x.dim(0) * c);
  Mat m = zeros(c, n);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = x[(b * c + i) * n + j];
  return m;
}

// Full CAN block for a batch, train-mode batch norm with batch statistics.
inline Tensor oracle_block(const Tensor& x, const CanBlockParams& p, std::size_t stride) {
  const std::size_t bsz = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = p.mo.value.dim(0);
  const std::size_t ho = (h + 2 - 3) / stride + 1, wo = (w + 2 - 3) / stride + 1;
  Tensor conv({bsz, co, ho, wo}, 0.0);
  for (std::size_t b = 0; b < bsz; ++b) {
    Mat xs = sample(x, b);
    Mat a = oracle_attended(xs, p.mq.value, p.mk.value, p.mv.value);
    std::vector<double> g = oracle_gate(xs, p.me.value);
    Mat psi = zeros(c, h * w);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < h * w; ++j) psi[i][j] = a[i][j] * g[i] + xs[i][j];
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t s = 0; s < wo; ++s) {
          double acc = 0.0;
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t u = 0; u < 3; ++u)
              for (std::size_t t = 0; t < 3; ++t) {
                const long y = static_cast<long>(r * stride + u) - 1, xx = static_cast<long>(s * stride + t) - 1;
                if (y < 0 || xx < 0 || y >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
                acc += p.mo.value.at(o, i, u, t) * psi[i][static_cast<std::size_t>(y) * w + static_cast<std::size_t>(xx)];
              }
          conv.at(b, o, r, s) = acc;
        }
  }
  Tensor out = conv;
  const double m = static_cast<double>(bsz * ho * wo);
  for (std::size_t o = 0; o < co; ++o) {
    double mean = 0.0, var = 0.0;
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t s = 0; s < wo; ++s) mean += conv.at(b, o, r, s);
    mean /= m;
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t s = 0; s < wo; ++s) var += std::pow(conv.at(b, o, r, s) - mean, 2);
    var /= m;
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t s = 0; s < wo; ++s) {
          const double y = (conv.at(b, o, r, s) - mean) / std::sqrt(var + 1e-5) * p.bn_scale.value[o] + p.bn_shift.value[o];
          out.at(b, o, r, s) = std::max(0.0, y);
        }
  }
  return out;
}

inline void randomize(CanBlockParams& p, Rng& rng) {
  for (Parameter* t : {&p.mq, &p.mk, &p.mv, &p.me, &p.mo, &p.bn_scale, &p.bn_shift})
    for (auto& v : t->value.data()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : p.bn_scale.value.data()) v = rng.uniform(0.5, 1.5);
}

inline Tensor permute_columns(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor y = x;
  const std::size_t rows = x.size() / perm.size(), n = perm.size();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] = x[r * n + perm[j]];
  return y;
}

}  // namespace procan::oracle
