#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "fsvi/gaussian.hpp"

using namespace fsvi;

namespace {

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

FunctionGaussian random_fg_2d(RngKey key) {
  Rng rng(key);
  const double a = rng.uniform(0.5, 1.5);
  const double b = rng.uniform(0.5, 1.5);
  const double c = rng.uniform(-0.6, 0.6) * std::sqrt(a * b);
  Matrix cov(2, 2);
  cov(0, 0) = a;
  cov(1, 1) = b;
  cov(0, 1) = cov(1, 0) = c;
  return FunctionGaussian({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)},
                          cov);
}

}  // namespace

TEST_CASE("cholesky: identity factors with zero jitter") {
  const std::vector<double> schedule{0.0};
  const auto r = cholesky(identity(3), schedule);
  CHECK(r.jitter == 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(r.lower(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("cholesky: hand-expanded 2x2 factor") {
  Matrix m(2, 2);
  m(0, 0) = 4.0;
  m(0, 1) = m(1, 0) = 2.0;
  m(1, 1) = 3.0;
  const auto r = cholesky(m, kDefaultJitter);
  CHECK(r.jitter == 0.0);
  CHECK(r.lower(0, 0) == doctest::Approx(2.0));
  CHECK(r.lower(1, 0) == doctest::Approx(1.0));
  CHECK(r.lower(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.lower(0, 1) == 0.0);
}

TEST_CASE("cholesky: rank-1 matrix needs jitter") {
  const std::vector<double> v{1.0, 2.0, -1.0};
  Matrix m(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = v[i] * v[j];
  const std::vector<double> schedule{0.0, 1e-8};
  const auto r = cholesky(m, schedule);
  CHECK(r.jitter == 1e-8);
  // L L^T reproduces m + jitter*I.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        acc += r.lower(i, k) * r.lower(j, k);
      CHECK(acc == doctest::Approx(m(i, j) + (i == j ? 1e-8 : 0.0))
                       .epsilon(1e-9));
    }
}

TEST_CASE("cholesky: error paths") {
  Matrix asym(2, 2);
  asym(0, 0) = 1.0;
  asym(0, 1) = 0.5;
  asym(1, 0) = 0.2;
  asym(1, 1) = 1.0;
  CHECK_THROWS_AS(cholesky(asym, kDefaultJitter), DimensionMismatch);

  Matrix indefinite(2, 2);
  indefinite(0, 0) = 1.0;
  indefinite(1, 1) = -5.0;
  CHECK_THROWS_AS(cholesky(indefinite, kDefaultJitter), FactorizationFailed);

  Matrix rect(2, 3);
  CHECK_THROWS_AS(cholesky(rect, kDefaultJitter), DimensionMismatch);
}

TEST_CASE("gaussian_kl: identical distributions give zero") {
  const auto g = random_fg_2d(RngKey{5});
  CHECK(gaussian_kl(g, g) <= 1e-8);
}

TEST_CASE("gaussian_kl: 1D closed form") {
  const FunctionGaussian q({1.0}, identity(1));
  const FunctionGaussian p({0.0}, identity(1));
  CHECK(gaussian_kl(q, p) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gaussian_kl: dimension mismatch") {
  const FunctionGaussian q({0.0}, identity(1));
  const FunctionGaussian p({0.0, 0.0}, identity(2));
  CHECK_THROWS_AS(gaussian_kl(q, p), DimensionMismatch);
}

TEST_CASE("gaussian_kl: quadrature oracle, 1D and 2D") {
  // Fixed-seed random pair checked against the 2D grid oracle.
  {
    const auto q = random_fg_2d(RngKey{42});
    const auto p = random_fg_2d(RngKey{43});
    const double kl = gaussian_kl(q, p);
    const double oracle = oracle::kl_quadrature_2d(q.mean, q.covariance,
                                                   p.mean, p.covariance);
    CHECK(kl == doctest::Approx(oracle).epsilon(0).scale(1).epsilon(1e-4));
    CHECK(std::abs(kl - oracle) < 1e-4);
  }
  // 50 random 1D/2D instances.
  for (std::uint64_t i = 0; i < 50; ++i) {
    CAPTURE(i);
    if (i % 2 == 0) {
      Rng rng(RngKey{100 + i});
      const double mq = rng.uniform(-2.0, 2.0), mp = rng.uniform(-2.0, 2.0);
      const double vq = rng.uniform(0.5, 2.0), vp = rng.uniform(0.5, 2.0);
      const FunctionGaussian q({mq}, Matrix::from_rows({{vq}}));
      const FunctionGaussian p({mp}, Matrix::from_rows({{vp}}));
      CHECK(std::abs(gaussian_kl(q, p) -
                     oracle::kl_quadrature_1d(mq, vq, mp, vp)) < 1e-4);
    } else {
      const auto q = random_fg_2d(RngKey{1000 + i});
      const auto p = random_fg_2d(RngKey{2000 + i});
      CHECK(std::abs(gaussian_kl(q, p) -
                     oracle::kl_quadrature_2d(q.mean, q.covariance, p.mean,
                                              p.covariance)) < 1e-4);
    }
  }
}

TEST_CASE("gaussian_kl: nonnegative on random pairs") {
  for (std::uint64_t i = 0; i < 40; ++i) {
    const auto q = random_fg_2d(RngKey{3000 + i});
    const auto p = random_fg_2d(RngKey{4000 + i});
    CHECK(gaussian_kl(q, p) >= 0.0);
  }
}

TEST_CASE("diag_gaussian_kl: basics and additivity") {
  const DiagonalGaussian q({0.0}, {2.0});
  const DiagonalGaussian p({0.0}, {1.0});
  CHECK(diag_gaussian_kl(q, q) == 0.0);
  const double expected = 0.5 * (2.0 - 1.0 - std::log(2.0));
  CHECK(diag_gaussian_kl(q, p) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.15343).epsilon(1e-4));

  const DiagonalGaussian q2({0.0, 1.0}, {2.0, 0.5});
  const DiagonalGaussian p2({0.0, 0.0}, {1.0, 1.0});
  const DiagonalGaussian qa({0.0}, {2.0}), pa({0.0}, {1.0});
  const DiagonalGaussian qb({1.0}, {0.5}), pb({0.0}, {1.0});
  CHECK(diag_gaussian_kl(q2, p2) ==
        doctest::Approx(diag_gaussian_kl(qa, pa) + diag_gaussian_kl(qb, pb))
            .epsilon(1e-12));
}

TEST_CASE("diag_gaussian_kl agrees with the dense KL on diagonal lifts") {
  Rng rng(RngKey{77});
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 3;
    std::vector<double> mq(d), vq(d), mp(d), vp(d);
    for (std::size_t i = 0; i < d; ++i) {
      mq[i] = rng.uniform(-1.0, 1.0);
      mp[i] = rng.uniform(-1.0, 1.0);
      vq[i] = rng.uniform(0.3, 2.0);
      vp[i] = rng.uniform(0.3, 2.0);
    }
    Matrix cq(d, d), cp(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      cq(i, i) = vq[i];
      cp(i, i) = vp[i];
    }
    const double dense = gaussian_kl(FunctionGaussian(mq, cq),
                                     FunctionGaussian(mp, cp));
    const double diag = diag_gaussian_kl(DiagonalGaussian(mq, vq),
                                         DiagonalGaussian(mp, vp));
    CHECK(std::abs(dense - diag) < 1e-10);
  }
}

TEST_CASE("sample: determinism and degenerate covariance") {
  const FunctionGaussian point({1.0, -2.0}, Matrix(2, 2));
  const Matrix draws = sample(point, RngKey{9}, 5);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(draws(r, 0) == 1.0);
    CHECK(draws(r, 1) == -2.0);
  }

  const DiagonalGaussian g({0.5, -0.5}, {1.0, 2.0});
  CHECK(sample(g, RngKey{10}, 4) == sample(g, RngKey{10}, 4));
  const auto fg = random_fg_2d(RngKey{11});
  CHECK(sample(fg, RngKey{12}, 4) == sample(fg, RngKey{12}, 4));
}

TEST_CASE("sample: CLT bound on the mean of 1e5 standard normal draws") {
  const DiagonalGaussian g({0.0}, {1.0});
  const std::size_t n = 100000;
  const Matrix draws = sample(g, RngKey{123}, n);
  double mean = 0.0;
  for (std::size_t r = 0; r < n; ++r) mean += draws(r, 0);
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
}
