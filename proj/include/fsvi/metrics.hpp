#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/predictive.hpp"

namespace fsvi {

// Expected calibration error over equal-width confidence bins; confidence is
// the max class probability, bins are half-open with the last bin closed.
double ece(const Matrix& probs, std::span<const int> labels,
           std::size_t bins = 10);

// Exact Mann-Whitney AUROC by pair counting: P(out > in) + P(out == in)/2.
// Out-of-distribution is the positive class.
double auroc(std::span<const double> scores_in,
             std::span<const double> scores_out);

// Mean squared L2 distance between probability rows and one-hot labels.
double brier(const Matrix& probs, std::span<const int> labels);

// Per-row Shannon entropy in nats with 0 log 0 = 0.
std::vector<double> predictive_entropy(const Matrix& probs);

struct SelectivePoint {
  double referral_rate = 0.0;
  double metric = 0.0;
};

// For each rate gamma, drops the ceil(gamma*N) most-uncertain points (equal
// uncertainties drop higher indices first, so the retained set is a prefix
// when all scores tie) and evaluates metric_fn on the retained indices.
std::vector<SelectivePoint> selective_prediction(
    std::span<const double> uncertainty,
    const std::function<double(std::span<const std::size_t>)>& metric_fn,
    std::span<const double> referral_rates);

double accuracy(const Matrix& probs, std::span<const int> labels);

// Mean negative log predictive density of the Gaussian predictive.
double regression_nll(const Matrix& pred_mean, const Matrix& pred_var,
                      const Matrix& y);

// Mean negative log probability of the true class.
double classification_nll(const Matrix& probs, std::span<const int> labels);

double rmse(const Matrix& pred_mean, const Matrix& y);

struct MetricsReport {
  std::optional<double> nll;
  std::optional<double> rmse;
  std::optional<double> accuracy;
  std::optional<double> ece;
  std::optional<double> brier;
  std::optional<double> auroc;
  std::optional<double> mean_entropy;
  std::vector<SelectivePoint> selective;

  std::string to_json() const;
};

std::string selective_csv(const std::vector<SelectivePoint>& table);

}  // namespace fsvi
