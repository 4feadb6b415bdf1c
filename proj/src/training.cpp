#include "fsvi/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fsvi/errors.hpp"
#include "fsvi/metrics.hpp"
#include "fsvi/predictive.hpp"

#include "json.hpp"

namespace fsvi {

void adam_step(AdamState& state, std::span<const double> grads,
               std::span<double> params, double learning_rate,
               const AdamParams& hyper) {
  const std::size_t n = params.size();
  if (grads.size() != n)
    throw DimensionMismatch("adam_step: gradient length mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n)
    throw DimensionMismatch("adam_step: state length mismatch");
  state.step += 1;
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / corr1;
    const double v_hat = state.v[i] / corr2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

namespace {

double validation_log_likelihood(const VariationalPosterior& q,
                                 const MlpSpec& spec, const Dataset& val,
                                 const Likelihood& lik, std::size_t draws,
                                 RngKey key) {
  const auto pred = posterior_predictive(q, spec, val.X, lik, draws, key);
  if (pred.classification) {
    const auto labels = val.labels();
    return -classification_nll(pred.mean, labels);
  }
  return -regression_nll(pred.mean, pred.variance, val.y);
}

double lr_at(const TrainConfig& cfg, std::size_t step, std::size_t total) {
  if (cfg.lr_schedule == LrSchedule::Constant || total <= 1)
    return cfg.learning_rate;
  const double progress =
      static_cast<double>(step) / static_cast<double>(total);
  constexpr double kPi = 3.14159265358979323846;
  return 0.5 * cfg.learning_rate * (1.0 + std::cos(kPi * progress));
}

}  // namespace

TrainResult train(const MlpSpec& spec, const Dataset& train_split,
                  const Dataset& val_split, const TrainConfig& config) {
  if (train_split.size() == 0) throw EmptyData("train: empty training split");
  if (config.batch_size == 0)
    throw ConfigError("train: batch_size must be positive");

  const std::size_t N = train_split.size();
  const std::size_t P = param_count(spec);
  const std::size_t batches = (N + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches;
  const double ell_scale =
      static_cast<double>(N) / static_cast<double>(
                                   std::min(config.batch_size, N));

  const RngKey root{config.seed};
  TrainResult result;
  result.posterior = init_posterior(spec, derive(root, 0),
                                    config.initial_sigma);
  const LinearizationConfig lin =
      default_linearization(spec, config.lin_samples);

  AdamState adam;
  std::vector<double> flat(2 * P);
  std::copy(result.posterior.mu.begin(), result.posterior.mu.end(),
            flat.begin());
  std::copy(result.posterior.rho.begin(), result.posterior.rho.end(),
            flat.begin() + P);

  result.best_val_ll = -std::numeric_limits<double>::infinity();
  result.best_posterior = result.posterior;

  std::vector<std::size_t> order(N);
  std::vector<double> grad(2 * P);
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const RngKey epoch_key = derive(root, 1 + epoch);
    std::iota(order.begin(), order.end(), 0);
    {
      Rng rng(derive(epoch_key, 0));
      for (std::size_t i = N; i-- > 1;) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(order[i], order[j]);
      }
    }

    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, N);
      Batch batch;
      batch.X = Matrix(hi - lo, train_split.X.cols());
      batch.y = Matrix(hi - lo, train_split.y.cols());
      for (std::size_t r = lo; r < hi; ++r) {
        for (std::size_t c = 0; c < batch.X.cols(); ++c)
          batch.X(r - lo, c) = train_split.X(order[r], c);
        for (std::size_t c = 0; c < batch.y.cols(); ++c)
          batch.y(r - lo, c) = train_split.y(order[r], c);
      }

      const RngKey step_key = derive(epoch_key, 1 + b);
      ContextBatch contexts;
      try {
        contexts = assemble_contexts(config.context, batch.X,
                                     derive(step_key, 0));
      } catch (const Error& e) {
        throw ConfigError(std::string("train: context assembly failed: ") +
                          e.what());
      }

      VariationalPosterior q;
      q.mu.assign(flat.begin(), flat.begin() + P);
      q.rho.assign(flat.begin() + P, flat.end());

      ElboGradient g;
      try {
        g = elbo_grad(q, config.prior, spec, batch, contexts,
                      config.likelihood, config.mc_samples, lin,
                      config.kl_scale, config.grad_policy,
                      derive(step_key, 1), ell_scale);
      } catch (const FactorizationFailed& e) {
        // e.what() already names the offending context set.
        throw FactorizationFailed(std::string(e.what()) + " [step " +
                                  std::to_string(global_step) + "]");
      }

      std::copy(g.mu.begin(), g.mu.end(), grad.begin());
      std::copy(g.rho.begin(), g.rho.end(), grad.begin() + P);
      double norm = 0.0;
      for (double v : grad) norm += v * v;

      adam_step(adam, grad, flat, lr_at(config, global_step, total_steps),
                config.adam);
      ++global_step;

      result.history.steps.push_back({g.value, g.diag.ell, g.diag.fkl,
                                      g.diag.argmax_index, std::sqrt(norm)});
    }

    if (val_split.size() > 0) {
      VariationalPosterior q;
      q.mu.assign(flat.begin(), flat.begin() + P);
      q.rho.assign(flat.begin() + P, flat.end());
      const double vll = validation_log_likelihood(
          q, spec, val_split, config.likelihood, config.val_mc_samples,
          derive(epoch_key, 2));
      result.history.epochs.push_back({epoch, vll});
      if (vll > result.best_val_ll) {
        result.best_val_ll = vll;
        result.best_posterior = q;
      }
    }
  }

  result.posterior.mu.assign(flat.begin(), flat.begin() + P);
  result.posterior.rho.assign(flat.begin() + P, flat.end());
  if (val_split.size() == 0) result.best_posterior = result.posterior;
  return result;
}

namespace {

nlohmann::json stats_to_json(const ColumnStats& s) {
  return {{"mean", s.mean},
          {"sd", s.sd},
          {"scaled", std::vector<int>(s.scaled.begin(), s.scaled.end())}};
}

ColumnStats stats_from_json(const nlohmann::json& j) {
  ColumnStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.sd = j.at("sd").get<std::vector<double>>();
  for (int v : j.at("scaled").get<std::vector<int>>())
    s.scaled.push_back(v != 0);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["version"] = 1;
  j["layer_sizes"] = ckpt.spec.layer_sizes;
  std::vector<std::string> acts;
  for (auto a : ckpt.spec.hidden_activations) acts.push_back(to_string(a));
  j["hidden_activations"] = acts;
  j["mu"] = ckpt.posterior.mu;
  j["rho"] = ckpt.posterior.rho;
  j["classification"] = ckpt.classification;
  if (const auto* reg = std::get_if<GaussianRegression>(&ckpt.likelihood)) {
    j["likelihood"] = {{"kind", "gaussian_regression"},
                       {"noise_variance", reg->noise_variance}};
  } else {
    j["likelihood"] = {{"kind", "categorical_softmax"}};
  }
  if (ckpt.x_stats) j["x_stats"] = stats_to_json(*ckpt.x_stats);
  if (ckpt.y_stats) j["y_stats"] = stats_to_json(*ckpt.y_stats);
  j["config_hash"] = ckpt.config_hash;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out << "FSVI1\n" << j.dump() << "\n";
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "FSVI1")
    throw CheckpointError("checkpoint magic mismatch (expected FSVI1)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    std::vector<Activation> acts;
    for (const auto& s : j.at("hidden_activations"))
      acts.push_back(activation_from_string(s.get<std::string>()));
    ckpt.spec = MlpSpec(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                        std::move(acts));
    ckpt.posterior.mu = j.at("mu").get<std::vector<double>>();
    ckpt.posterior.rho = j.at("rho").get<std::vector<double>>();
    ckpt.classification = j.at("classification").get<bool>();
    const auto& lik = j.at("likelihood");
    if (lik.at("kind") == "gaussian_regression")
      ckpt.likelihood =
          GaussianRegression{lik.at("noise_variance").get<double>()};
    else
      ckpt.likelihood = CategoricalSoftmax{};
    if (j.contains("x_stats")) ckpt.x_stats = stats_from_json(j["x_stats"]);
    if (j.contains("y_stats")) ckpt.y_stats = stats_from_json(j["y_stats"]);
    ckpt.config_hash = j.value("config_hash", "");
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  if (ckpt.posterior.mu.size() != param_count(ckpt.spec) ||
      ckpt.posterior.rho.size() != param_count(ckpt.spec))
    throw CheckpointError("checkpoint parameter length mismatch");
  return ckpt;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream os;
  os.precision(17);
  os << "step,elbo,ell,fkl,argmax_index,grad_norm\n";
  for (std::size_t i = 0; i < history.steps.size(); ++i) {
    const auto& s = history.steps[i];
    os << i << "," << s.elbo << "," << s.ell << "," << s.fkl << ","
       << s.argmax_index << "," << s.grad_norm << "\n";
  }
  return os.str();
}

}  // namespace fsvi
