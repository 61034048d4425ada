#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "edgeguard/tensor.hpp"

// Independent reference implementations used as test oracles. None of these
// call into the library's kernels.
namespace oracle {

using edgeguard::Tensor2;

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = dist(gen);
  return t;
}

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

// Single-sample 1-D cross-correlation: x [L × cin], w[k][c][o], explicit zero padding.
inline Tensor2 conv1d(const Tensor2& x, const Tensor2& kernel, const Tensor2& bias, std::size_t k,
                      std::size_t stride, std::size_t pad_left, std::size_t out_len) {
  const std::size_t cin = x.cols(), cout = kernel.cols();
  Tensor2 y(out_len, cout);
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      double s = bias(0, o);
      for (std::size_t tap = 0; tap < k; ++tap) {
        const long pos = static_cast<long>(t * stride + tap) - static_cast<long>(pad_left);
        if (pos < 0 || pos >= static_cast<long>(x.rows())) continue;
        for (std::size_t c = 0; c < cin; ++c) s += x(static_cast<std::size_t>(pos), c) * kernel(tap * cin + c, o);
      }
      y(t, o) = s;
    }
  return y;
}

inline Tensor2 maxpool(const Tensor2& x, std::size_t window) {
  const std::size_t out_len = (x.rows() + window - 1) / window;
  Tensor2 y(out_len, x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c)
    for (std::size_t t = 0; t < out_len; ++t) {
      double m = -INFINITY;
      for (std::size_t i = t * window; i < std::min(x.rows(), (t + 1) * window); ++i) m = std::max(m, x(i, c));
      y(t, c) = m;
    }
  return y;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar LSTM step for one sample. Gate blocks [i | f | o | g].
inline void lstm_step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c,
                      const Tensor2& wx, const Tensor2& wh, const Tensor2& b) {
  const std::size_t n = h.size();
  std::vector<double> hn(n), cn(n);
  for (std::size_t u = 0; u < n; ++u) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const std::size_t col = static_cast<std::size_t>(g) * n + u;
      double s = b(0, col);
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * wx(i, col);
      for (std::size_t i = 0; i < n; ++i) s += h[i] * wh(i, col);
      z[g] = s;
    }
    const double ig = sigmoid(z[0]), fg = sigmoid(z[1]), og = sigmoid(z[2]), gg = std::tanh(z[3]);
    cn[u] = fg * c[u] + ig * gg;
    hn[u] = og * std::tanh(cn[u]);
  }
  h = hn;
  c = cn;
}

inline double bce(const std::vector<double>& p, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    s += y[i] ? -std::log(q) : -std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

// Mann-Whitney statistic: fraction of (pos, neg) pairs ordered correctly, ties 1/2.
inline double pair_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) good += 1.0;
      else if (s[i] == s[j]) good += 0.5;
    }
  }
  return good / pairs;
}

// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central difference of f with respect to entry i of t.
inline double central_difference(Tensor2& t, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
  double& v = t.values()[i];
  const double saved = v;
  v = saved + h;
  const double up = f();
  v = saved - h;
  const double down = f();
  v = saved;
  return (up - down) / (2.0 * h);
}

inline double weighted_sum(const Tensor2& y, const Tensor2& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * r.values()[i];
  return s;
}

// Max relative error between analytic gradients and central differences of f
// over every entry of every tensor in wrt.
template <typename Analytic = std::vector<const Tensor2*>>
double max_fd_error(const std::vector<Tensor2*>& wrt, const Analytic& analytic, const std::function<double()>& f) {
  double worst = 0.0;
  for (std::size_t b = 0; b < wrt.size(); ++b)
    for (std::size_t i = 0; i < wrt[b]->size(); ++i) {
      const double numeric = central_difference(*wrt[b], i, f);
      worst = std::max(worst, relative_error(analytic[b]->values()[i], numeric));
    }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("edgeguard_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
