#include "fsvi/gaussian.hpp"

#include <cmath>
#include <string>

#include "fsvi/errors.hpp"

namespace fsvi {

const std::vector<double> kDefaultJitter = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};

DiagonalGaussian::DiagonalGaussian(std::vector<double> m, std::vector<double> v)
    : mean(std::move(m)), variance(std::move(v)) {
  if (mean.size() != variance.size())
    throw DimensionMismatch("DiagonalGaussian: mean/variance length mismatch");
  for (double x : variance)
    if (x < 0.0 || !std::isfinite(x))
      throw DimensionMismatch("DiagonalGaussian: variance must be >= 0");
}

FunctionGaussian::FunctionGaussian(std::vector<double> m, Matrix cov)
    : mean(std::move(m)), covariance(std::move(cov)) {
  if (covariance.rows() != covariance.cols() ||
      covariance.rows() != mean.size())
    throw DimensionMismatch("FunctionGaussian: covariance shape mismatch");
}

namespace {

// In-place lower Cholesky attempt on a copy; fails on a non-positive pivot.
bool try_factor(const Matrix& A, double lambda, Matrix& L) {
  const std::size_t n = A.rows();
  L = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j) + lambda;
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return true;
}

// Solve L y = b.
void forward_solve(const Matrix& L, std::span<const double> b,
                   std::vector<double>& y) {
  const std::size_t n = L.rows();
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
}

double log_det_from_factor(const Matrix& L) {
  double ld = 0.0;
  for (std::size_t i = 0; i < L.rows(); ++i) ld += std::log(L(i, i));
  return 2.0 * ld;
}

}  // namespace

CholeskyResult cholesky(const Matrix& matrix,
                        std::span<const double> jitter_schedule) {
  if (matrix.rows() != matrix.cols())
    throw DimensionMismatch("cholesky: matrix is not square");
  for (std::size_t r = 0; r < matrix.rows(); ++r)
    for (std::size_t c = r + 1; c < matrix.cols(); ++c)
      if (std::abs(matrix(r, c) - matrix(c, r)) > 1e-8)
        throw DimensionMismatch("cholesky: matrix is not symmetric");

  CholeskyResult result;
  for (double lambda : jitter_schedule) {
    if (try_factor(matrix, lambda, result.lower)) {
      result.jitter = lambda;
      return result;
    }
  }
  throw FactorizationFailed(
      "cholesky: matrix indefinite under the whole jitter schedule (max "
      "lambda " +
      std::to_string(jitter_schedule.empty() ? 0.0 : jitter_schedule.back()) +
      ")");
}

double gaussian_kl(const FunctionGaussian& q, const FunctionGaussian& p,
                   std::span<const double> jitter_schedule) {
  const std::size_t k = q.dim();
  if (p.dim() != k)
    throw DimensionMismatch("gaussian_kl: dimension mismatch");
  const CholeskyResult Lp = cholesky(p.covariance, jitter_schedule);
  const CholeskyResult Lq = cholesky(q.covariance, jitter_schedule);

  // tr(Sp^-1 Sq) = ||Lp^-1 Lq||_F^2, column by column.
  double trace = 0.0;
  std::vector<double> col(k), y;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i)
      col[i] = i >= j ? Lq.lower(i, j) : 0.0;
    forward_solve(Lp.lower, col, y);
    for (double v : y) trace += v * v;
  }

  std::vector<double> diff(k);
  for (std::size_t i = 0; i < k; ++i) diff[i] = p.mean[i] - q.mean[i];
  forward_solve(Lp.lower, diff, y);
  double maha = 0.0;
  for (double v : y) maha += v * v;

  const double log_det_p = log_det_from_factor(Lp.lower);
  const double log_det_q = log_det_from_factor(Lq.lower);

  double kl =
      0.5 * (trace + maha - static_cast<double>(k) + log_det_p - log_det_q);
  if (kl < 0.0) {
    if (kl < -1e-8)
      throw FactorizationFailed("gaussian_kl: significantly negative value " +
                                std::to_string(kl));
    kl = 0.0;
  }
  return kl;
}

double diag_gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  if (q.dim() != p.dim())
    throw DimensionMismatch("diag_gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double vq = q.variance[i];
    const double vp = p.variance[i];
    if (!(vp > 0.0))
      throw DimensionMismatch("diag_gaussian_kl: prior variance must be > 0");
    const double d = q.mean[i] - p.mean[i];
    kl += 0.5 * (vq / vp + d * d / vp - 1.0 + std::log(vp / vq));
  }
  if (kl < 0.0 && kl >= -1e-8) kl = 0.0;
  return kl;
}

Matrix sample(const DiagonalGaussian& dist, RngKey key, std::size_t count) {
  Matrix out(count, dist.dim());
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng(derive(key, r));
    for (std::size_t i = 0; i < dist.dim(); ++i)
      out(r, i) = dist.mean[i] + std::sqrt(dist.variance[i]) * rng.normal();
  }
  return out;
}

Matrix sample(const FunctionGaussian& dist, RngKey key, std::size_t count,
              std::span<const double> jitter_schedule) {
  const std::size_t k = dist.dim();
  Matrix out(count, k);
  // An all-zero covariance is a point mass; skip factorization entirely.
  bool zero = true;
  for (std::size_t i = 0; i < dist.covariance.size() && zero; ++i)
    if (dist.covariance.data()[i] != 0.0) zero = false;
  if (zero) {
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t i = 0; i < k; ++i) out(r, i) = dist.mean[i];
    return out;
  }
  const CholeskyResult L = cholesky(dist.covariance, jitter_schedule);
  std::vector<double> z(k);
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng(derive(key, r));
    for (auto& v : z) v = rng.normal();
    for (std::size_t i = 0; i < k; ++i) {
      double acc = dist.mean[i];
      for (std::size_t j = 0; j <= i; ++j) acc += L.lower(i, j) * z[j];
      out(r, i) = acc;
    }
  }
  return out;
}

}  // namespace fsvi
