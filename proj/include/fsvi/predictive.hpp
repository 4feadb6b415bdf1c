#pragma once

#include <vector>

#include "fsvi/objective.hpp"

namespace fsvi {

// Monte Carlo posterior predictive over reparameterized parameter draws,
// evaluated through the unlinearized network.
//
// Regression: mean/variance per output, variance = noise_variance plus the
// between-draw variance of the predicted means (population form, so a single
// draw gives the noise floor). Entropy is the Gaussian differential entropy
// summed over outputs.
//
// Classification: mean softmax probabilities across draws; entropy is the
// Shannon entropy of that mean in nats.
struct PredictiveOutput {
  bool classification = false;
  Matrix mean;                  // N x Q: predictive means or class probs
  Matrix variance;              // N x Q (regression only)
  std::vector<double> entropy;  // per point
};

PredictiveOutput posterior_predictive(const VariationalPosterior& q,
                                      const MlpSpec& spec, const Matrix& X,
                                      const Likelihood& lik,
                                      std::size_t draws, RngKey key);

}  // namespace fsvi
