#include "fsvi/objective.hpp"

#include <algorithm>
#include <cmath>

#include "fsvi/errors.hpp"
#include "fsvi/kernels.hpp"
#include "fsvi/objective_ref.hpp"

namespace fsvi {

namespace {
constexpr double kPi = 3.14159265358979323846;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double sigma) {
  // log(exp(sigma) - 1), stable for small sigma.
  if (sigma > 30.0) return sigma;
  return std::log(std::expm1(sigma));
}

std::vector<double> VariationalPosterior::sigma() const {
  std::vector<double> s(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) s[i] = softplus(rho[i]);
  return s;
}

DiagonalGaussian VariationalPosterior::to_gaussian() const {
  auto s = sigma();
  for (auto& v : s) v *= v;
  return DiagonalGaussian(mu, std::move(s));
}

VariationalPosterior init_posterior(const MlpSpec& spec, RngKey key,
                                    double initial_sigma) {
  VariationalPosterior q;
  q.mu = init_params(spec, key, InitScheme::UniformFanIn).values;
  q.rho.assign(q.mu.size(), softplus_inverse(initial_sigma));
  return q;
}

std::vector<double> PriorSpec::mean_vector(std::size_t dim) const {
  if (mean.empty()) return std::vector<double>(dim, 0.0);
  if (mean.size() != dim)
    throw DimensionMismatch("PriorSpec: mean has wrong length");
  return mean;
}

DiagonalGaussian PriorSpec::to_gaussian(std::size_t dim) const {
  if (!(variance > 0.0)) throw ConfigError("PriorSpec: variance must be > 0");
  return DiagonalGaussian(mean_vector(dim),
                          std::vector<double>(dim, variance));
}

double log_likelihood(const Likelihood& lik, const Matrix& f, const Matrix& y) {
  if (f.rows() != y.rows())
    throw DimensionMismatch("log_likelihood: row count mismatch");
  const std::size_t Q = f.cols();
  double total = 0.0;
  if (const auto* reg = std::get_if<GaussianRegression>(&lik)) {
    if (y.cols() != Q)
      throw DimensionMismatch("log_likelihood: target width mismatch");
    const double inv = 1.0 / reg->noise_variance;
    const double log_norm = -0.5 * std::log(2.0 * kPi * reg->noise_variance);
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t q = 0; q < Q; ++q) {
        const double r = y(i, q) - f(i, q);
        total += log_norm - 0.5 * inv * r * r;
      }
  } else {
    for (std::size_t i = 0; i < f.rows(); ++i) {
      double mx = f(i, 0);
      for (std::size_t q = 1; q < Q; ++q) mx = std::max(mx, f(i, q));
      double lse = 0.0;
      for (std::size_t q = 0; q < Q; ++q) lse += std::exp(f(i, q) - mx);
      const auto label = static_cast<std::size_t>(y(i, 0));
      if (label >= Q)
        throw DimensionMismatch("log_likelihood: class index out of range");
      total += f(i, label) - mx - std::log(lse);
    }
  }
  return total;
}

Matrix log_likelihood_grad(const Likelihood& lik, const Matrix& f,
                           const Matrix& y) {
  const std::size_t Q = f.cols();
  Matrix g(f.rows(), Q);
  if (const auto* reg = std::get_if<GaussianRegression>(&lik)) {
    const double inv = 1.0 / reg->noise_variance;
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t q = 0; q < Q; ++q)
        g(i, q) = (y(i, q) - f(i, q)) * inv;
  } else {
    for (std::size_t i = 0; i < f.rows(); ++i) {
      double mx = f(i, 0);
      for (std::size_t q = 1; q < Q; ++q) mx = std::max(mx, f(i, q));
      double lse = 0.0;
      for (std::size_t q = 0; q < Q; ++q) lse += std::exp(f(i, q) - mx);
      const auto label = static_cast<std::size_t>(y(i, 0));
      for (std::size_t q = 0; q < Q; ++q) {
        const double p = std::exp(f(i, q) - mx) / lse;
        g(i, q) = (q == label ? 1.0 : 0.0) - p;
      }
    }
  }
  return g;
}

double function_space_kl(const VariationalPosterior& q, const PriorSpec& prior,
                         const MlpSpec& spec, const Matrix& X,
                         const LinearizationConfig& lin, RngKey key) {
  if (X.rows() == 0) throw EmptyData("function_space_kl: empty evaluation set");
  const DiagonalGaussian qg = q.to_gaussian();
  const DiagonalGaussian pg = prior.to_gaussian(qg.dim());

  LinearizationConfig cfg = lin;
  cfg.samples = 1;
  const auto q_push = push_forward_mc(qg, spec, X, cfg, key);
  // The prior reuses the key so both alpha samples share the same normals.
  std::span<const double> z{};
  if (prior.policy == LinearizationPointPolicy::SharedVariationalMean)
    z = std::span<const double>(qg.mean.data(), qg.mean.size());
  const auto p_push = push_forward_mc(pg, spec, X, cfg, key, z);
  return gaussian_kl(q_push.front(), p_push.front());
}

SupremumResult supremum_estimate(const VariationalPosterior& q,
                                 const PriorSpec& prior, const MlpSpec& spec,
                                 const ContextBatch& contexts,
                                 const LinearizationConfig& lin, RngKey key) {
  if (contexts.sets.empty())
    throw EmptyData("supremum_estimate: no context sets");
  SupremumResult best;
  for (std::size_t i = 0; i < contexts.sets.size(); ++i) {
    double kl = 0.0;
    try {
      kl = function_space_kl(q, prior, spec, contexts.sets[i], lin,
                             derive(key, i));
    } catch (const FactorizationFailed& e) {
      throw FactorizationFailed(std::string(e.what()) + " [context set " +
                                std::to_string(i) + "]");
    }
    if (i == 0 || kl > best.value) {
      best.value = kl;
      best.argmax_index = i;
    }
  }
  return best;
}

double expected_log_likelihood(const VariationalPosterior& q,
                               const MlpSpec& spec, const Batch& batch,
                               const Likelihood& lik, std::size_t M,
                               RngKey key) {
  if (M == 0) throw ConfigError("expected_log_likelihood: M must be >= 1");
  if (batch.X.rows() == 0)
    throw EmptyData("expected_log_likelihood: empty batch");
  const std::size_t P = q.dim();
  const auto sig = q.sigma();
  const RngKey k_ell = derive(key, 1);
  double total = 0.0;
  ParamVector theta;
  theta.values.resize(P);
  for (std::size_t j = 0; j < M; ++j) {
    const auto eps = standard_normals(derive(k_ell, j), P);
    for (std::size_t i = 0; i < P; ++i)
      theta.values[i] = q.mu[i] + sig[i] * eps[i];
    total += log_likelihood(lik, forward(spec, theta, batch.X), batch.y);
  }
  return total / static_cast<double>(M);
}

ElboResult elbo(const VariationalPosterior& q, const PriorSpec& prior,
                const MlpSpec& spec, const Batch& batch,
                const ContextBatch& contexts, const Likelihood& lik,
                std::size_t M, const LinearizationConfig& lin,
                double kl_scale, RngKey key, double ell_scale) {
  ElboResult out;
  out.diag.ell = expected_log_likelihood(q, spec, batch, lik, M, key);
  const auto sup = supremum_estimate(q, prior, spec, contexts, lin,
                                     derive(key, 2));
  out.diag.fkl = sup.value;
  out.diag.argmax_index = sup.argmax_index;
  out.value = ell_scale * out.diag.ell - kl_scale * out.diag.fkl;
  return out;
}

namespace {

// Inverse from a Cholesky factor of (C + lambda I).
Matrix inverse_from_factor(const Matrix& L) {
  const std::size_t n = L.rows();
  Matrix inv(n, n);
  std::vector<double> col(n), y(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    // L y = e_j
    for (std::size_t i = 0; i < n; ++i) {
      double s = col[i];
      for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
      y[i] = s / L(i, i);
    }
    // L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * inv(k, j);
      inv(ii, j) = s / L(ii, ii);
    }
  }
  return inv;
}

std::vector<double> solve_spd(const Matrix& L, std::span<const double> b) {
  const std::size_t n = L.rows();
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
    x[ii] = s / L(ii, ii);
  }
  return x;
}

struct FklGradient {
  std::vector<double> mu;
  std::vector<double> rho;
};

// Gradient of the argmax context set's KL under the stop-gradient policy.
// Jacobian factors are constants; the mean term differentiates through
// f(X; mu) and the alpha-block sigma, the covariance term through the
// beta-block sigma.
FklGradient fkl_gradient_stop_grad(const VariationalPosterior& q,
                                   const PriorSpec& prior, const MlpSpec& spec,
                                   const Matrix& X,
                                   const LinearizationConfig& lin,
                                   RngKey set_key) {
  const std::size_t P = q.dim();
  const std::size_t alpha = lin.partition.alpha_count;
  const auto sig = q.sigma();
  const auto eps = standard_normals(derive(set_key, 0), alpha);
  const auto prior_mean = prior.mean_vector(P);
  const bool shared =
      prior.policy == LinearizationPointPolicy::SharedVariationalMean;

  const ParamVector mu_params{q.mu};
  const ParamVector z_params = shared ? mu_params : ParamVector{prior_mean};

  // Variational pushforward about mu.
  const Matrix f_mu = forward(spec, mu_params, X);
  std::vector<double> dq(P, 0.0);
  for (std::size_t i = 0; i < alpha; ++i) dq[i] = sig[i] * eps[i];
  auto u_q = kernels::jvp_batch(spec, q.mu, X, dq);
  for (std::size_t i = 0; i < u_q.size(); ++i) u_q[i] += f_mu.storage()[i];

  const Matrix J_beta_q = final_layer_jacobian(spec, mu_params, X);
  std::vector<double> beta_var(P - alpha);
  for (std::size_t i = alpha; i < P; ++i)
    beta_var[i - alpha] = sig[i] * sig[i];
  const Matrix C_q = kernels::scaled_gram(J_beta_q, beta_var);

  // Prior pushforward about the policy point.
  const double sp = std::sqrt(prior.variance);
  std::vector<double> dp(P);
  for (std::size_t i = 0; i < P; ++i) {
    dp[i] = prior_mean[i] - z_params.values[i];
    if (i < alpha) dp[i] += sp * eps[i];
  }
  const Matrix f_z = shared ? f_mu : forward(spec, z_params, X);
  auto u_p = kernels::jvp_batch(spec, z_params.values, X, dp);
  for (std::size_t i = 0; i < u_p.size(); ++i) u_p[i] += f_z.storage()[i];

  const Matrix J_beta_p =
      shared ? J_beta_q : final_layer_jacobian(spec, z_params, X);
  const std::vector<double> prior_beta_var(P - alpha, prior.variance);
  const Matrix C_p = kernels::scaled_gram(J_beta_p, prior_beta_var);

  const CholeskyResult Lp = cholesky(C_p, kDefaultJitter);
  const CholeskyResult Lq = cholesky(C_q, kDefaultJitter);

  // Mean term: d KL / d u_q = Cp^{-1} (u_q - u_p).
  std::vector<double> delta(u_q.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = u_q[i] - u_p[i];
  const auto g_u = solve_spd(Lp.lower, delta);
  const auto w = kernels::vjp_batch(spec, q.mu, X, g_u);

  FklGradient grad;
  grad.mu = w;
  grad.rho.assign(P, 0.0);
  for (std::size_t i = 0; i < alpha; ++i)
    grad.rho[i] = w[i] * eps[i] * sigmoid(q.rho[i]);

  // Covariance term: d KL / d C_q = (Cp^{-1} - Cq^{-1}) / 2, contracted with
  // the frozen beta-Jacobian columns.
  const Matrix inv_p = inverse_from_factor(Lp.lower);
  const Matrix inv_q = inverse_from_factor(Lq.lower);
  const std::size_t n = C_q.rows();
  for (std::size_t b = 0; b < P - alpha; ++b) {
    double dv = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double jr = J_beta_q(r, b);
      if (jr == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c)
        dv += jr * 0.5 * (inv_p(r, c) - inv_q(r, c)) * J_beta_q(c, b);
    }
    const std::size_t i = alpha + b;
    grad.rho[i] = dv * 2.0 * sig[i] * sigmoid(q.rho[i]);
  }
  return grad;
}

}  // namespace

ElboGradient elbo_grad(const VariationalPosterior& q, const PriorSpec& prior,
                       const MlpSpec& spec, const Batch& batch,
                       const ContextBatch& contexts, const Likelihood& lik,
                       std::size_t M, const LinearizationConfig& lin,
                       double kl_scale, GradPolicy policy, RngKey key,
                       double ell_scale) {
  const std::size_t P = q.dim();
  ElboGradient out;
  out.mu.assign(P, 0.0);
  out.rho.assign(P, 0.0);

  if (policy == GradPolicy::ExactSmallNet) {
    if (P > 2000)
      throw PolicyViolation("exact_small_net requires param_count <= 2000");
    // Forward-mode sweep of the reference objective, one coordinate at a
    // time; value and argmax come from the same dual run.
    std::vector<Dual> mu(P), rho(P);
    for (std::size_t i = 0; i < P; ++i) {
      mu[i] = Dual(q.mu[i]);
      rho[i] = Dual(q.rho[i]);
    }
    for (std::size_t c = 0; c < 2 * P; ++c) {
      if (c < P)
        mu[c].t = 1.0;
      else
        rho[c - P].t = 1.0;
      const Dual v = ref::elbo_value<Dual>(mu, rho, prior, spec, batch,
                                           contexts, lik, M, lin, kl_scale,
                                           key, ell_scale);
      if (c < P) {
        out.mu[c] = -v.t;
        mu[c].t = 0.0;
      } else {
        out.rho[c - P] = -v.t;
        rho[c - P].t = 0.0;
      }
    }
    const auto val = elbo(q, prior, spec, batch, contexts, lik, M, lin,
                          kl_scale, key, ell_scale);
    out.value = val.value;
    out.diag = val.diag;
    return out;
  }

  // Stop-gradient policy. Value pass first (shared with elbo), then the
  // analytic gradient at the same draws.
  const auto val = elbo(q, prior, spec, batch, contexts, lik, M, lin, kl_scale,
                        key, ell_scale);
  out.value = val.value;
  out.diag = val.diag;

  // Likelihood term: reparameterized pathwise gradients.
  const auto sig = q.sigma();
  const RngKey k_ell = derive(key, 1);
  ParamVector theta;
  theta.values.resize(P);
  const double m_scale = ell_scale / static_cast<double>(M);
  for (std::size_t j = 0; j < M; ++j) {
    const auto eps = standard_normals(derive(k_ell, j), P);
    for (std::size_t i = 0; i < P; ++i)
      theta.values[i] = q.mu[i] + sig[i] * eps[i];
    const Matrix f = forward(spec, theta, batch.X);
    const Matrix cot = log_likelihood_grad(lik, f, batch.y);
    const auto g = kernels::vjp_batch(spec, theta.values, batch.X,
                                      cot.storage());
    for (std::size_t i = 0; i < P; ++i) {
      out.mu[i] -= m_scale * g[i];
      out.rho[i] -= m_scale * g[i] * eps[i] * sigmoid(q.rho[i]);
    }
  }

  // KL term at the argmax context set only.
  if (kl_scale != 0.0) {
    const RngKey k_fkl = derive(key, 2);
    const auto fg = fkl_gradient_stop_grad(
        q, prior, spec, contexts.sets[val.diag.argmax_index], lin,
        derive(k_fkl, val.diag.argmax_index));
    for (std::size_t i = 0; i < P; ++i) {
      out.mu[i] += kl_scale * fg.mu[i];
      out.rho[i] += kl_scale * fg.rho[i];
    }
  }
  return out;
}

}  // namespace fsvi
