#pragma once

// Scalar-generic serial restatement of the training objective. This is the
// reference the production path is tested against, and — instantiated with
// Dual scalars — the source of exact gradients for small networks. It favors
// clarity over speed: Jacobians are materialized and everything runs on one
// thread.

#include <cmath>
#include <vector>

#include "fsvi/autodiff.hpp"
#include "fsvi/errors.hpp"
#include "fsvi/network_rowops.hpp"
#include "fsvi/objective.hpp"

namespace fsvi::ref {

template <class S>
S softplus_s(S x) {
  if (value_of(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

// Dense Jacobian at `params`, rows ordered (input, output).
template <class S>
std::vector<std::vector<S>> jacobian_dense(const MlpSpec& spec,
                                           const std::vector<S>& params,
                                           const Matrix& X) {
  const std::size_t Q = spec.output_dim();
  const std::size_t P = params.size();
  std::vector<std::vector<S>> J(X.rows() * Q, std::vector<S>(P, S(0)));
  std::vector<S> cot(Q);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto cache = rowops::forward_row<S>(
        spec, std::span<const S>(params.data(), P), X.row(i));
    for (std::size_t q = 0; q < Q; ++q) {
      for (auto& c : cot) c = S(0);
      cot[q] = S(1);
      rowops::backward_row_cotangent<S>(
          spec, std::span<const S>(params.data(), P), cache, cot,
          std::span<S>(J[i * Q + q].data(), P));
    }
  }
  return J;
}

template <class S>
std::vector<S> forward_flat(const MlpSpec& spec, const std::vector<S>& params,
                            const Matrix& X) {
  const std::size_t Q = spec.output_dim();
  std::vector<S> out(X.rows() * Q);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto cache = rowops::forward_row<S>(
        spec, std::span<const S>(params.data(), params.size()), X.row(i));
    for (std::size_t q = 0; q < Q; ++q) out[i * Q + q] = cache.post.back()[q];
  }
  return out;
}

// Lower Cholesky of A + lambda*I for the first workable schedule entry.
// Branches on values only, mirroring the production factorization.
template <class S>
std::vector<std::vector<S>> cholesky_jittered(
    const std::vector<std::vector<S>>& A, std::span<const double> schedule) {
  const std::size_t n = A.size();
  for (double lambda : schedule) {
    std::vector<std::vector<S>> L(n, std::vector<S>(n, S(0)));
    bool ok = true;
    for (std::size_t j = 0; j < n && ok; ++j) {
      S d = A[j][j] + S(lambda);
      for (std::size_t k = 0; k < j; ++k) d = d - L[j][k] * L[j][k];
      if (!(value_of(d) > 0.0) || !std::isfinite(value_of(d))) {
        ok = false;
        break;
      }
      L[j][j] = sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        S s = A[i][j];
        for (std::size_t k = 0; k < j; ++k) s = s - L[i][k] * L[j][k];
        L[i][j] = s / L[j][j];
      }
    }
    if (ok) return L;
  }
  throw FactorizationFailed("reference cholesky: schedule exhausted");
}

template <class S>
S gaussian_kl_s(const std::vector<S>& mean_q,
                const std::vector<std::vector<S>>& cov_q,
                const std::vector<S>& mean_p,
                const std::vector<std::vector<S>>& cov_p,
                std::span<const double> schedule) {
  const std::size_t k = mean_q.size();
  const auto Lp = cholesky_jittered(cov_p, schedule);
  const auto Lq = cholesky_jittered(cov_q, schedule);

  auto forward_solve = [&](const std::vector<std::vector<S>>& L,
                           const std::vector<S>& b) {
    std::vector<S> y(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
      S s = b[i];
      for (std::size_t kk = 0; kk < i; ++kk) s = s - L[i][kk] * y[kk];
      y[i] = s / L[i][i];
    }
    return y;
  };

  S trace(0);
  std::vector<S> col(k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) col[i] = i >= j ? Lq[i][j] : S(0);
    auto y = forward_solve(Lp, col);
    for (const auto& v : y) trace += v * v;
  }

  std::vector<S> diff(k);
  for (std::size_t i = 0; i < k; ++i) diff[i] = mean_p[i] - mean_q[i];
  auto w = forward_solve(Lp, diff);
  S maha(0);
  for (const auto& v : w) maha += v * v;

  S log_det_p(0), log_det_q(0);
  for (std::size_t i = 0; i < k; ++i) {
    log_det_p += log(Lp[i][i]);
    log_det_q += log(Lq[i][i]);
  }
  return S(0.5) * (trace + maha - S(static_cast<double>(k)) +
                   S(2) * (log_det_p - log_det_q));
}

template <class S>
S log_likelihood_s(const Likelihood& lik, const std::vector<S>& f,
                   const Matrix& y, std::size_t Q) {
  const std::size_t N = y.rows();
  S total(0);
  if (const auto* reg = std::get_if<GaussianRegression>(&lik)) {
    const double inv = 1.0 / reg->noise_variance;
    const double log_norm =
        -0.5 * std::log(2.0 * 3.14159265358979323846 * reg->noise_variance);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t q = 0; q < Q; ++q) {
        const S r = S(y(i, q)) - f[i * Q + q];
        total += S(log_norm) - S(0.5 * inv) * r * r;
      }
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      S mx = f[i * Q];
      for (std::size_t q = 1; q < Q; ++q)
        if (f[i * Q + q] > mx) mx = f[i * Q + q];
      S lse(0);
      for (std::size_t q = 0; q < Q; ++q) lse += exp(f[i * Q + q] - mx);
      const auto label = static_cast<std::size_t>(y(i, 0));
      total += f[i * Q + label] - mx - log(lse);
    }
  }
  return total;
}

// Objective value under the draw-derivation scheme shared with the
// production path (see elbo in objective.cpp).
template <class S>
S elbo_value(const std::vector<S>& mu, const std::vector<S>& rho,
             const PriorSpec& prior, const MlpSpec& spec, const Batch& batch,
             const ContextBatch& contexts, const Likelihood& lik,
             std::size_t M, const LinearizationConfig& lin, double kl_scale,
             RngKey key, double ell_scale) {
  const std::size_t P = mu.size();
  const std::size_t Q = spec.output_dim();
  const std::size_t alpha = lin.partition.alpha_count;
  std::vector<S> sigma(P);
  for (std::size_t i = 0; i < P; ++i) sigma[i] = softplus_s(rho[i]);

  // Expected log-likelihood.
  const RngKey k_ell = derive(key, 1);
  S ell(0);
  std::vector<S> theta(P);
  for (std::size_t j = 0; j < M; ++j) {
    const auto eps = standard_normals(derive(k_ell, j), P);
    for (std::size_t i = 0; i < P; ++i)
      theta[i] = mu[i] + sigma[i] * S(eps[i]);
    const auto f = forward_flat(spec, theta, batch.X);
    ell += log_likelihood_s<S>(lik, f, batch.y, Q);
  }
  ell = ell / S(static_cast<double>(M));

  // Supremum of the function-space KL over context sets.
  const RngKey k_fkl = derive(key, 2);
  const auto prior_mean = prior.mean_vector(P);
  S best_kl(0);
  bool first = true;
  for (std::size_t s = 0; s < contexts.sets.size(); ++s) {
    const Matrix& X = contexts.sets[s];
    const RngKey set_key = derive(k_fkl, s);
    const auto eps = standard_normals(derive(set_key, 0), alpha);

    // Variational side, linearized about mu.
    const auto Jq = jacobian_dense(spec, mu, X);
    const auto fq = forward_flat(spec, mu, X);
    const std::size_t n = fq.size();
    std::vector<S> dq(P, S(0));
    for (std::size_t i = 0; i < alpha; ++i) dq[i] = sigma[i] * S(eps[i]);
    std::vector<S> mean_q(n);
    for (std::size_t r = 0; r < n; ++r) {
      S acc = fq[r];
      for (std::size_t i = 0; i < alpha; ++i) acc += Jq[r][i] * dq[i];
      mean_q[r] = acc;
    }
    std::vector<std::vector<S>> cov_q(n, std::vector<S>(n, S(0)));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        S acc(0);
        for (std::size_t i = alpha; i < P; ++i)
          acc += Jq[r][i] * sigma[i] * sigma[i] * Jq[c][i];
        cov_q[r][c] = acc;
      }

    // Prior side, linearized about the policy's point.
    const bool shared =
        prior.policy == LinearizationPointPolicy::SharedVariationalMean;
    std::vector<S> z(P);
    for (std::size_t i = 0; i < P; ++i)
      z[i] = shared ? mu[i] : S(prior_mean[i]);
    const auto Jp = shared ? Jq : jacobian_dense(spec, z, X);
    const auto fp = shared ? fq : forward_flat(spec, z, X);
    const S sp = sqrt(S(prior.variance));
    std::vector<S> dp(P);
    for (std::size_t i = 0; i < P; ++i) {
      dp[i] = S(prior_mean[i]) - z[i];
      if (i < alpha) dp[i] += sp * S(eps[i]);
    }
    std::vector<S> mean_p(n);
    for (std::size_t r = 0; r < n; ++r) {
      S acc = fp[r];
      for (std::size_t i = 0; i < P; ++i) acc += Jp[r][i] * dp[i];
      mean_p[r] = acc;
    }
    std::vector<std::vector<S>> cov_p(n, std::vector<S>(n, S(0)));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        S acc(0);
        for (std::size_t i = alpha; i < P; ++i)
          acc += Jp[r][i] * S(prior.variance) * Jp[c][i];
        cov_p[r][c] = acc;
      }

    S kl = gaussian_kl_s<S>(mean_q, cov_q, mean_p, cov_p, kDefaultJitter);
    if (value_of(kl) < 0.0) kl = S(0);
    if (first || kl > best_kl) {
      best_kl = kl;
      first = false;
    }
  }

  return S(ell_scale) * ell - S(kl_scale) * best_kl;
}

}  // namespace fsvi::ref
