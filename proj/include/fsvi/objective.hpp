#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "fsvi/context.hpp"
#include "fsvi/gaussian.hpp"
#include "fsvi/linearization.hpp"
#include "fsvi/network.hpp"

namespace fsvi {

// Variational parameters: unconstrained rho, sigma = softplus(rho).
struct VariationalPosterior {
  std::vector<double> mu;
  std::vector<double> rho;

  std::vector<double> sigma() const;
  DiagonalGaussian to_gaussian() const;
  std::size_t dim() const { return mu.size(); }
};

double softplus(double x);
double softplus_inverse(double sigma);

// Fresh posterior with fan-in initialized mean and sigma ~ initial_sigma
// everywhere. Small initial variance keeps the linearized pushforward close
// to the network early in training.
VariationalPosterior init_posterior(const MlpSpec& spec, RngKey key,
                                    double initial_sigma = 1e-3);

enum class LinearizationPointPolicy { PriorMean, SharedVariationalMean };

// Isotropic Gaussian prior over parameters. An empty mean denotes the zero
// vector. PriorMean linearizes the prior pushforward about its own mean,
// which degenerates for most architectures at zero; the shared policy reuses
// the variational mean and is the default operating mode.
struct PriorSpec {
  std::vector<double> mean;  // empty = zeros
  double variance = 1.0;
  LinearizationPointPolicy policy =
      LinearizationPointPolicy::SharedVariationalMean;

  std::vector<double> mean_vector(std::size_t dim) const;
  DiagonalGaussian to_gaussian(std::size_t dim) const;
};

struct GaussianRegression {
  double noise_variance = 0.1;
};
struct CategoricalSoftmax {};
using Likelihood = std::variant<GaussianRegression, CategoricalSoftmax>;

// Training batch. For regression y is N x Q; for classification y is N x 1
// holding the class index.
struct Batch {
  Matrix X;
  Matrix y;
};

// log p(y | f) summed over the rows of f, plus its derivative in f.
double log_likelihood(const Likelihood& lik, const Matrix& f, const Matrix& y);
Matrix log_likelihood_grad(const Likelihood& lik, const Matrix& f,
                           const Matrix& y);

// KL between the linearized variational and prior pushforwards at X. The
// variational side is the single-sample partition estimator linearized about
// mu; the prior side is linearized about the policy's point. Both sides draw
// their alpha sample from the same key, so identical distributions give an
// exactly vanishing KL.
double function_space_kl(const VariationalPosterior& q, const PriorSpec& prior,
                         const MlpSpec& spec, const Matrix& X,
                         const LinearizationConfig& lin, RngKey key);

struct SupremumResult {
  double value = 0.0;
  std::size_t argmax_index = 0;
};

// Finite-sample supremum estimate: max of function_space_kl over the context
// sets, set i evaluated under derive(key, i). Ties break to the lowest index.
SupremumResult supremum_estimate(const VariationalPosterior& q,
                                 const PriorSpec& prior, const MlpSpec& spec,
                                 const ContextBatch& contexts,
                                 const LinearizationConfig& lin, RngKey key);

// Monte Carlo expected log-likelihood over M reparameterized draws
// theta = mu + softplus(rho) .* eps, evaluated through the unlinearized
// network and summed over the batch.
double expected_log_likelihood(const VariationalPosterior& q,
                               const MlpSpec& spec, const Batch& batch,
                               const Likelihood& lik, std::size_t M,
                               RngKey key);

struct ElboDiagnostics {
  double ell = 0.0;
  double fkl = 0.0;
  std::size_t argmax_index = 0;
};

struct ElboResult {
  double value = 0.0;
  ElboDiagnostics diag;
};

// value = ell_scale * ELL - kl_scale * sup-KL. ell_scale defaults to 1 (the
// plain objective); the trainer passes N/batch_size to estimate the
// full-data bound.
ElboResult elbo(const VariationalPosterior& q, const PriorSpec& prior,
                const MlpSpec& spec, const Batch& batch,
                const ContextBatch& contexts, const Likelihood& lik,
                std::size_t M, const LinearizationConfig& lin,
                double kl_scale, RngKey key, double ell_scale = 1.0);

enum class GradPolicy { StopGradJacobian, ExactSmallNet };

struct ElboGradient {
  std::vector<double> mu;   // d(-elbo)/d mu
  std::vector<double> rho;  // d(-elbo)/d rho
  double value = 0.0;       // elbo at the same draws
  ElboDiagnostics diag;
};

// Gradient of the negative objective under the same draws as elbo(key).
//
// StopGradJacobian treats every Jacobian factor (both pushforward
// covariances and the J appearing in the pushforward means) as a constant;
// gradients flow through f(X; mu), through sigma(rho), and through the
// reparameterized likelihood. ExactSmallNet differentiates the full
// objective with forward-mode dual numbers (one pass per coordinate) and is
// restricted to param_count <= 2000.
ElboGradient elbo_grad(const VariationalPosterior& q, const PriorSpec& prior,
                       const MlpSpec& spec, const Batch& batch,
                       const ContextBatch& contexts, const Likelihood& lik,
                       std::size_t M, const LinearizationConfig& lin,
                       double kl_scale, GradPolicy policy, RngKey key,
                       double ell_scale = 1.0);

}  // namespace fsvi
