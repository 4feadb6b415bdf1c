#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsvi/context.hpp"
#include "fsvi/data.hpp"
#include "fsvi/objective.hpp"

namespace fsvi {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update; params are modified in place.
void adam_step(AdamState& state, std::span<const double> grads,
               std::span<double> params, double learning_rate,
               const AdamParams& hyper);

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  AdamParams adam;
  std::size_t mc_samples = 5;      // M, likelihood draws per step
  std::size_t lin_samples = 1;     // R
  double kl_scale = 1.0;
  GradPolicy grad_policy = GradPolicy::StopGradJacobian;
  std::uint64_t seed = 0;
  ContextConfig context;
  Likelihood likelihood;
  PriorSpec prior;
  LrSchedule lr_schedule = LrSchedule::Constant;
  double initial_sigma = 1e-3;
  std::size_t val_mc_samples = 16;  // predictive draws for validation LL
};

struct StepRecord {
  double elbo = 0.0;
  double ell = 0.0;
  double fkl = 0.0;
  std::size_t argmax_index = 0;
  double grad_norm = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double val_log_likelihood = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  VariationalPosterior posterior;
  TrainHistory history;
  VariationalPosterior best_posterior;  // highest validation log-likelihood
  double best_val_ll = 0.0;
};

// Seeded end-to-end: per-epoch shuffles, per-step context assembly and
// objective draws all derive from config.seed. The likelihood term is scaled
// by N/batch_size so each step estimates the full-data bound. An empty
// validation split skips the per-epoch metrics.
TrainResult train(const MlpSpec& spec, const Dataset& train_split,
                  const Dataset& val_split, const TrainConfig& config);

// Checkpoint: "FSVI1" magic line followed by a JSON document holding the
// architecture, variational parameters, likelihood, standardization
// statistics and a config hash.
struct Checkpoint {
  MlpSpec spec;
  VariationalPosterior posterior;
  Likelihood likelihood;
  bool classification = false;
  std::optional<ColumnStats> x_stats;
  std::optional<ColumnStats> y_stats;
  std::string config_hash;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string history_csv(const TrainHistory& history);

}  // namespace fsvi
