#pragma once

#include <span>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/rng.hpp"

namespace fsvi {

// Mean-field Gaussian over a flat parameter vector.
struct DiagonalGaussian {
  std::vector<double> mean;
  std::vector<double> variance;  // elementwise, > 0 (0 allowed for clamped
                                 // coordinates in degenerate test setups)

  DiagonalGaussian() = default;
  DiagonalGaussian(std::vector<double> m, std::vector<double> v);
  std::size_t dim() const { return mean.size(); }
};

// Multivariate Gaussian over network outputs at a finite evaluation set.
// The mean is the row-major flattening of an N x Q output block.
struct FunctionGaussian {
  std::vector<double> mean;
  Matrix covariance;

  FunctionGaussian() = default;
  FunctionGaussian(std::vector<double> m, Matrix cov);
  std::size_t dim() const { return mean.size(); }
};

// Escalating diagonal loads tried in order when a covariance is numerically
// singular. The first entry should be 0 so well-conditioned matrices are
// never perturbed.
extern const std::vector<double> kDefaultJitter;

struct CholeskyResult {
  Matrix lower;
  double jitter = 0.0;  // the lambda actually added to the diagonal
};

// Factors matrix + lambda*I for the smallest lambda in the schedule that
// succeeds. Requires a square matrix, symmetric within 1e-8; throws
// FactorizationFailed when every level fails.
CholeskyResult cholesky(const Matrix& matrix,
                        std::span<const double> jitter_schedule);

// KL divergence in nats between two multivariate Gaussians, computed from
// jittered Cholesky factors of both covariances. Tiny negative round-off
// (>= -1e-8) is clamped to zero; anything lower throws.
double gaussian_kl(const FunctionGaussian& q, const FunctionGaussian& p,
                   std::span<const double> jitter_schedule = kDefaultJitter);

double diag_gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p);

// Seed-reproducible draws; one draw per row.
Matrix sample(const DiagonalGaussian& dist, RngKey key, std::size_t count);
Matrix sample(const FunctionGaussian& dist, RngKey key, std::size_t count,
              std::span<const double> jitter_schedule = kDefaultJitter);

}  // namespace fsvi
