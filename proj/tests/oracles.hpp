#pragma once

// Test-only oracles, kept independent of the library's computation paths:
// direct quadrature for Gaussian KL, central finite differences for
// Jacobians and gradients, and brute-force moment estimators.

#include <cmath>
#include <functional>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/network.hpp"

namespace oracle {

inline double gauss1d_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

// Midpoint-rule KL for 1D Gaussians over mean_q +- 8 sd_q.
inline double kl_quadrature_1d(double mq, double vq, double mp, double vp,
                               std::size_t cells = 160000) {
  const double sd = std::sqrt(vq);
  const double lo = mq - 8.0 * sd, hi = mq + 8.0 * sd;
  const double h = (hi - lo) / static_cast<double>(cells);
  double kl = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double x = lo + (static_cast<double>(i) + 0.5) * h;
    const double q = gauss1d_pdf(x, mq, vq);
    if (q <= 0.0) continue;
    const double p = gauss1d_pdf(x, mp, vp);
    kl += q * std::log(q / p) * h;
  }
  return kl;
}

// Midpoint-rule KL for 2D Gaussians on a 400x400 grid over the box
// mean_q +- 8 marginal standard deviations.
inline double kl_quadrature_2d(const std::vector<double>& mq,
                               const fsvi::Matrix& Sq,
                               const std::vector<double>& mp,
                               const fsvi::Matrix& Sp,
                               std::size_t grid = 400) {
  auto inv2 = [](const fsvi::Matrix& S, double& det, fsvi::Matrix& inv) {
    det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    inv = fsvi::Matrix(2, 2);
    inv(0, 0) = S(1, 1) / det;
    inv(1, 1) = S(0, 0) / det;
    inv(0, 1) = -S(0, 1) / det;
    inv(1, 0) = -S(1, 0) / det;
  };
  double det_q, det_p;
  fsvi::Matrix iq, ip;
  inv2(Sq, det_q, iq);
  inv2(Sp, det_p, ip);
  auto log_pdf = [](const std::vector<double>& m, const fsvi::Matrix& inv,
                    double det, double x0, double x1) {
    const double d0 = x0 - m[0], d1 = x1 - m[1];
    const double quad =
        d0 * (inv(0, 0) * d0 + inv(0, 1) * d1) +
        d1 * (inv(1, 0) * d0 + inv(1, 1) * d1);
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
  };
  const double s0 = std::sqrt(Sq(0, 0)), s1 = std::sqrt(Sq(1, 1));
  const double lo0 = mq[0] - 8.0 * s0, hi0 = mq[0] + 8.0 * s0;
  const double lo1 = mq[1] - 8.0 * s1, hi1 = mq[1] + 8.0 * s1;
  const double h0 = (hi0 - lo0) / static_cast<double>(grid);
  const double h1 = (hi1 - lo1) / static_cast<double>(grid);
  double kl = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double x0 = lo0 + (static_cast<double>(i) + 0.5) * h0;
    for (std::size_t j = 0; j < grid; ++j) {
      const double x1 = lo1 + (static_cast<double>(j) + 0.5) * h1;
      const double lq = log_pdf(mq, iq, det_q, x0, x1);
      const double lp = log_pdf(mp, ip, det_p, x0, x1);
      kl += std::exp(lq) * (lq - lp) * h0 * h1;
    }
  }
  return kl;
}

// Central-difference Jacobian, step 1e-5.
inline fsvi::Matrix fd_jacobian(const fsvi::MlpSpec& spec,
                                const fsvi::ParamVector& params,
                                const fsvi::Matrix& X, double step = 1e-5) {
  const std::size_t P = params.size();
  const std::size_t rows = X.rows() * spec.output_dim();
  fsvi::Matrix J(rows, P);
  fsvi::ParamVector perturbed = params;
  for (std::size_t p = 0; p < P; ++p) {
    perturbed.values[p] = params.values[p] + step;
    const fsvi::Matrix up = fsvi::forward(spec, perturbed, X);
    perturbed.values[p] = params.values[p] - step;
    const fsvi::Matrix dn = fsvi::forward(spec, perturbed, X);
    perturbed.values[p] = params.values[p];
    for (std::size_t r = 0; r < rows; ++r)
      J(r, p) = (up.storage()[r] - dn.storage()[r]) / (2.0 * step);
  }
  return J;
}

// max |a-b| / max(1, |a|, |b|) over all entries.
inline double max_rel_error(const fsvi::Matrix& a, const fsvi::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    const double scale = std::max({1.0, std::abs(x), std::abs(y)});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

// Central differences of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double step = 1e-4) {
  std::vector<double> g(x.size());
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double up = f(xp);
    xp[i] = x[i] - step;
    const double dn = f(xp);
    xp[i] = x[i];
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

struct Moments {
  std::vector<double> mean;
  fsvi::Matrix cov;
};

inline Moments sample_moments(const std::vector<std::vector<double>>& draws) {
  const std::size_t n = draws.size();
  const std::size_t d = draws.front().size();
  Moments m;
  m.mean.assign(d, 0.0);
  for (const auto& row : draws)
    for (std::size_t i = 0; i < d; ++i) m.mean[i] += row[i];
  for (auto& v : m.mean) v /= static_cast<double>(n);
  m.cov = fsvi::Matrix(d, d);
  for (const auto& row : draws)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        m.cov(i, j) += (row[i] - m.mean[i]) * (row[j] - m.mean[j]);
  for (std::size_t i = 0; i < d * d; ++i)
    m.cov.data()[i] /= static_cast<double>(n - 1);
  return m;
}

}  // namespace oracle
