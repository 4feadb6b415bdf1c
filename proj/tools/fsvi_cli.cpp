// Command-line front end: train / evaluate / predict / datagen.
//
// Exit codes: 0 success, 1 configuration or data error, 2 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsvi/context.hpp"
#include "fsvi/data.hpp"
#include "fsvi/errors.hpp"
#include "fsvi/metrics.hpp"
#include "fsvi/parallel.hpp"
#include "fsvi/predictive.hpp"
#include "fsvi/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw fsvi::ConfigError("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fsvi::ConfigError("cannot open config " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw fsvi::ConfigError("config parse failure in " + path + ": " +
                            e.what());
  }
}

// Typos in hyperparameter names fail loudly instead of silently using a
// default.
void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw fsvi::ConfigError("unknown key '" + key + "' in " + where);
  }
}

struct RunConfig {
  bool classification = false;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  fsvi::MlpSpec spec;
  // data
  std::optional<std::string> generator_kind;
  std::size_t gen_n = 200;
  double gen_noise = 0.1;
  std::optional<std::string> train_csv;
  std::optional<std::string> test_csv;
  std::vector<std::size_t> target_columns;
  bool has_header = false;
  bool do_standardize = false;
  double val_fraction = 0.1;
  double test_fraction = 0.0;
  // training
  fsvi::TrainConfig train;
  // context construction
  std::string context_kind = "uniform_box";
  std::vector<std::array<double, 2>> context_bounds;  // empty = from data
  std::size_t context_channels = 1;
  std::optional<std::string> context_csv;
  // eval
  std::size_t eval_mc_samples = 50;
  std::vector<double> referral_rates;
};

fsvi::MlpSpec parse_model(const json& j) {
  reject_unknown_keys(j, {"layer_sizes", "activation"}, "model");
  auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  const auto act =
      fsvi::activation_from_string(j.value("activation", std::string("tanh")));
  return fsvi::MlpSpec(std::move(sizes), act);
}

RunConfig parse_config(const json& j) {
  reject_unknown_keys(j,
                      {"schema_version", "task", "seed", "output_dir", "model",
                       "data", "train", "prior", "likelihood", "context",
                       "eval"},
                      "config");
  if (j.value("schema_version", 0) != 1)
    throw fsvi::ConfigError("config schema_version must be 1");

  RunConfig cfg;
  const std::string task = j.at("task").get<std::string>();
  if (task == "classification")
    cfg.classification = true;
  else if (task != "regression")
    throw fsvi::ConfigError("task must be regression or classification");
  cfg.seed = j.value("seed", 0ull);
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.spec = parse_model(j.at("model"));

  const json& d = j.at("data");
  reject_unknown_keys(d,
                      {"generator", "train_csv", "test_csv", "target_columns",
                       "has_header", "standardize", "val_fraction",
                       "test_fraction"},
                      "data");
  if (d.contains("generator")) {
    const json& g = d.at("generator");
    reject_unknown_keys(g, {"kind", "n", "noise_sd"}, "data.generator");
    cfg.generator_kind = g.at("kind").get<std::string>();
    cfg.gen_n = g.value("n", 200u);
    cfg.gen_noise = g.value("noise_sd", 0.1);
  }
  if (d.contains("train_csv"))
    cfg.train_csv = d.at("train_csv").get<std::string>();
  if (d.contains("test_csv"))
    cfg.test_csv = d.at("test_csv").get<std::string>();
  if (d.contains("target_columns"))
    cfg.target_columns = d.at("target_columns").get<std::vector<std::size_t>>();
  cfg.has_header = d.value("has_header", false);
  cfg.do_standardize = d.value("standardize", false);
  cfg.val_fraction = d.value("val_fraction", 0.1);
  cfg.test_fraction = d.value("test_fraction", 0.0);
  if (!cfg.generator_kind && !cfg.train_csv)
    throw fsvi::ConfigError("data needs either a generator or train_csv");

  const json& t = j.at("train");
  reject_unknown_keys(t,
                      {"epochs", "batch_size", "learning_rate", "adam",
                       "mc_samples", "lin_samples", "kl_scale", "grad_policy",
                       "lr_schedule", "initial_sigma", "val_mc_samples"},
                      "train");
  cfg.train.epochs = t.value("epochs", 100u);
  cfg.train.batch_size = t.value("batch_size", 32u);
  cfg.train.learning_rate = t.value("learning_rate", 1e-3);
  if (t.contains("adam")) {
    const json& a = t.at("adam");
    reject_unknown_keys(a, {"beta1", "beta2", "eps"}, "train.adam");
    cfg.train.adam.beta1 = a.value("beta1", 0.9);
    cfg.train.adam.beta2 = a.value("beta2", 0.99);
    cfg.train.adam.eps = a.value("eps", 1e-8);
  }
  cfg.train.mc_samples = t.value("mc_samples", 5u);
  cfg.train.lin_samples = t.value("lin_samples", 1u);
  cfg.train.kl_scale = t.value("kl_scale", 1.0);
  const std::string policy =
      t.value("grad_policy", std::string("stop_grad_jacobian"));
  if (policy == "stop_grad_jacobian")
    cfg.train.grad_policy = fsvi::GradPolicy::StopGradJacobian;
  else if (policy == "exact_small_net")
    cfg.train.grad_policy = fsvi::GradPolicy::ExactSmallNet;
  else
    throw fsvi::ConfigError("unknown grad_policy " + policy);
  const std::string sched = t.value("lr_schedule", std::string("constant"));
  if (sched == "constant")
    cfg.train.lr_schedule = fsvi::LrSchedule::Constant;
  else if (sched == "cosine")
    cfg.train.lr_schedule = fsvi::LrSchedule::Cosine;
  else
    throw fsvi::ConfigError("unknown lr_schedule " + sched);
  cfg.train.initial_sigma = t.value("initial_sigma", 1e-3);
  cfg.train.val_mc_samples = t.value("val_mc_samples", 16u);

  const json& p = j.at("prior");
  reject_unknown_keys(p, {"variance", "linearization_point"}, "prior");
  cfg.train.prior.variance = p.value("variance", 1.0);
  const std::string lp =
      p.value("linearization_point", std::string("shared_variational_mean"));
  if (lp == "shared_variational_mean")
    cfg.train.prior.policy =
        fsvi::LinearizationPointPolicy::SharedVariationalMean;
  else if (lp == "prior_mean")
    cfg.train.prior.policy = fsvi::LinearizationPointPolicy::PriorMean;
  else
    throw fsvi::ConfigError("unknown linearization_point " + lp);

  const json& lik = j.at("likelihood");
  reject_unknown_keys(lik, {"kind", "noise_variance"}, "likelihood");
  const std::string kind = lik.at("kind").get<std::string>();
  if (kind == "gaussian_regression") {
    cfg.train.likelihood =
        fsvi::GaussianRegression{lik.value("noise_variance", 0.1)};
    if (cfg.classification)
      throw fsvi::ConfigError("gaussian likelihood with classification task");
  } else if (kind == "categorical_softmax") {
    cfg.train.likelihood = fsvi::CategoricalSoftmax{};
    if (!cfg.classification)
      throw fsvi::ConfigError("softmax likelihood with regression task");
  } else {
    throw fsvi::ConfigError("unknown likelihood kind " + kind);
  }

  const json& c = j.at("context");
  reject_unknown_keys(c, {"source", "s_sets", "k", "minibatch_mix_fraction"},
                      "context");
  const json& src = c.at("source");
  reject_unknown_keys(src, {"kind", "bounds", "channels", "csv"},
                      "context.source");
  cfg.context_kind = src.at("kind").get<std::string>();
  if (src.contains("bounds"))
    cfg.context_bounds =
        src.at("bounds").get<std::vector<std::array<double, 2>>>();
  cfg.context_channels = src.value("channels", 1u);
  if (src.contains("csv")) cfg.context_csv = src.at("csv").get<std::string>();
  cfg.train.context.s_sets = c.value("s_sets", 1u);
  cfg.train.context.k = c.value("k", 32u);
  cfg.train.context.minibatch_mix_fraction =
      c.value("minibatch_mix_fraction", 0.0);

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown_keys(e, {"mc_samples", "referral_rates"}, "eval");
    cfg.eval_mc_samples = e.value("mc_samples", 50u);
    if (e.contains("referral_rates"))
      cfg.referral_rates = e.at("referral_rates").get<std::vector<double>>();
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

fsvi::Dataset build_generated(const RunConfig& cfg) {
  const fsvi::RngKey key{cfg.seed ^ 0xD47AB7ull};
  if (*cfg.generator_kind == "two_moons")
    return fsvi::two_moons(cfg.gen_n, cfg.gen_noise, key);
  if (*cfg.generator_kind == "gap_sine")
    return fsvi::synthetic_1d(fsvi::Synthetic1dKind::GapSine, cfg.gen_n,
                              cfg.gen_noise, key);
  throw fsvi::ConfigError("unknown generator kind " + *cfg.generator_kind);
}

// Builds the context source in the (possibly standardized) model input
// space.
fsvi::ContextSource build_context_source(const RunConfig& cfg,
                                         const fsvi::Dataset& train_split) {
  if (cfg.context_kind == "uniform_box") {
    fsvi::BoxBounds bounds;
    if (!cfg.context_bounds.empty()) {
      for (const auto& b : cfg.context_bounds) {
        bounds.lo.push_back(b[0]);
        bounds.hi.push_back(b[1]);
      }
      if (cfg.do_standardize && train_split.x_stats) {
        for (std::size_t d = 0; d < bounds.dim(); ++d) {
          bounds.lo[d] = (bounds.lo[d] - train_split.x_stats->mean[d]) /
                         train_split.x_stats->sd[d];
          bounds.hi[d] = (bounds.hi[d] - train_split.x_stats->mean[d]) /
                         train_split.x_stats->sd[d];
        }
      }
    } else {
      bounds = fsvi::empirical_bounds(train_split.X);
    }
    return fsvi::UniformBoxSource{std::move(bounds)};
  }
  if (cfg.context_kind == "monochrome")
    return fsvi::build_monochrome_source(train_split.X, cfg.context_channels);
  if (cfg.context_kind == "auxiliary") {
    if (!cfg.context_csv)
      throw fsvi::ConfigError("auxiliary context source needs a csv");
    fsvi::Dataset aux = fsvi::load_csv(*cfg.context_csv, {}, cfg.has_header);
    if (cfg.do_standardize && train_split.x_stats) {
      for (std::size_t r = 0; r < aux.X.rows(); ++r)
        for (std::size_t c = 0; c < aux.X.cols(); ++c)
          aux.X(r, c) = (aux.X(r, c) - train_split.x_stats->mean[c]) /
                        train_split.x_stats->sd[c];
    }
    return fsvi::AuxiliarySource{std::move(aux.X)};
  }
  throw fsvi::ConfigError("unknown context source kind " + cfg.context_kind);
}

std::string hash_hex(const std::string& s) {
  std::ostringstream os;
  os << std::hex << std::hash<std::string>{}(s);
  return os.str();
}

std::vector<double> default_rates() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

fsvi::MetricsReport evaluate_dataset(const fsvi::Checkpoint& ckpt,
                                     const fsvi::Dataset& data_raw,
                                     std::size_t mc_samples,
                                     const std::vector<double>& rates,
                                     std::uint64_t seed,
                                     const std::optional<fsvi::Dataset>& ood,
                                     std::string* entropy_in_csv,
                                     std::string* entropy_out_csv) {
  fsvi::Dataset data = data_raw;
  if (ckpt.x_stats) {
    for (std::size_t r = 0; r < data.X.rows(); ++r)
      for (std::size_t c = 0; c < data.X.cols(); ++c)
        data.X(r, c) =
            (data.X(r, c) - ckpt.x_stats->mean[c]) / ckpt.x_stats->sd[c];
  }
  const auto pred = fsvi::posterior_predictive(
      ckpt.posterior, ckpt.spec, data.X, ckpt.likelihood, mc_samples,
      fsvi::RngKey{seed});

  fsvi::MetricsReport report;
  double entropy_sum = 0.0;
  for (double h : pred.entropy) entropy_sum += h;
  report.mean_entropy = entropy_sum / static_cast<double>(pred.entropy.size());

  if (pred.classification) {
    const auto labels = data.labels();
    report.accuracy = fsvi::accuracy(pred.mean, labels);
    report.ece = fsvi::ece(pred.mean, labels);
    report.brier = fsvi::brier(pred.mean, labels);
    report.nll = fsvi::classification_nll(pred.mean, labels);
    if (!rates.empty()) {
      report.selective = fsvi::selective_prediction(
          pred.entropy,
          [&](std::span<const std::size_t> retained) {
            std::size_t hits = 0;
            for (std::size_t i : retained) {
              std::size_t arg = 0;
              for (std::size_t c = 1; c < pred.mean.cols(); ++c)
                if (pred.mean(i, c) > pred.mean(i, arg)) arg = c;
              if (static_cast<int>(arg) == labels[i]) ++hits;
            }
            return static_cast<double>(hits) /
                   static_cast<double>(retained.size());
          },
          rates);
    }
  } else {
    // Report in the original target units.
    fsvi::Matrix mean = pred.mean;
    fsvi::Matrix var = pred.variance;
    fsvi::Matrix y = data.y;
    if (ckpt.y_stats) {
      mean = fsvi::unstandardize_targets(mean, *ckpt.y_stats);
      var = fsvi::unstandardize_variance(var, *ckpt.y_stats);
      // data came in raw units already
    }
    report.rmse = fsvi::rmse(mean, y);
    report.nll = fsvi::regression_nll(mean, var, y);
    if (!rates.empty()) {
      report.selective = fsvi::selective_prediction(
          pred.entropy,
          [&](std::span<const std::size_t> retained) {
            double total = 0.0;
            for (std::size_t i : retained) {
              for (std::size_t c = 0; c < mean.cols(); ++c) {
                const double d = mean(i, c) - y(i, c);
                total += d * d;
              }
            }
            return std::sqrt(total / static_cast<double>(retained.size()));
          },
          rates);
    }
  }

  if (ood) {
    fsvi::Dataset o = *ood;
    if (ckpt.x_stats) {
      for (std::size_t r = 0; r < o.X.rows(); ++r)
        for (std::size_t c = 0; c < o.X.cols(); ++c)
          o.X(r, c) = (o.X(r, c) - ckpt.x_stats->mean[c]) / ckpt.x_stats->sd[c];
    }
    const auto pred_ood = fsvi::posterior_predictive(
        ckpt.posterior, ckpt.spec, o.X, ckpt.likelihood, mc_samples,
        fsvi::RngKey{seed + 1});
    report.auroc = fsvi::auroc(pred.entropy, pred_ood.entropy);
    if (entropy_in_csv && entropy_out_csv) {
      std::ostringstream in_os, out_os;
      in_os.precision(17);
      out_os.precision(17);
      in_os << "entropy\n";
      for (double h : pred.entropy) in_os << h << "\n";
      out_os << "entropy\n";
      for (double h : pred_ood.entropy) out_os << h << "\n";
      *entropy_in_csv = in_os.str();
      *entropy_out_csv = out_os.str();
    }
  }
  return report;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out_override) {
  const json raw = load_json(config_path);
  RunConfig cfg = parse_config(raw);
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (out_override) cfg.output_dir = *out_override;

  // Assemble splits.
  fsvi::Dataset all;
  std::optional<fsvi::Dataset> test;
  if (cfg.generator_kind) {
    all = build_generated(cfg);
    all.classification = cfg.classification;
  } else {
    all = fsvi::load_csv(*cfg.train_csv, cfg.target_columns, cfg.has_header);
    all.classification = cfg.classification;
    if (cfg.test_csv) {
      test = fsvi::load_csv(*cfg.test_csv, cfg.target_columns, cfg.has_header);
      test->classification = cfg.classification;
    }
  }
  double train_frac = 1.0 - cfg.val_fraction;
  std::vector<double> fracs{train_frac, cfg.val_fraction};
  if (!test && cfg.test_fraction > 0.0) {
    fracs = {1.0 - cfg.val_fraction - cfg.test_fraction, cfg.val_fraction,
             cfg.test_fraction};
  }
  auto splits = fsvi::split(all, fracs, fsvi::RngKey{cfg.seed ^ 0x5917ull});
  fsvi::Dataset train_split = splits[0];
  fsvi::Dataset val_split = splits[1];
  if (splits.size() > 2) test = splits[2];

  std::optional<fsvi::Dataset> test_raw = test;
  if (cfg.do_standardize) {
    std::vector<fsvi::Dataset> others{val_split};
    if (test) others.push_back(*test);
    auto st = fsvi::standardize(train_split, others);
    train_split = st.train;
    val_split = st.others[0];
    if (test) test = st.others[1];
  }

  cfg.train.context.source = build_context_source(cfg, train_split);

  const auto result = fsvi::train(cfg.spec, train_split, val_split, cfg.train);

  fs::create_directories(cfg.output_dir);
  fsvi::Checkpoint ckpt;
  ckpt.spec = cfg.spec;
  ckpt.posterior = result.posterior;
  ckpt.likelihood = cfg.train.likelihood;
  ckpt.classification = cfg.classification;
  ckpt.x_stats = train_split.x_stats;
  ckpt.y_stats = train_split.y_stats;
  ckpt.config_hash = hash_hex(raw.dump());
  fsvi::save_checkpoint(cfg.output_dir + "/checkpoint.fsvi", ckpt);

  fsvi::Checkpoint best = ckpt;
  best.posterior = result.best_posterior;
  fsvi::save_checkpoint(cfg.output_dir + "/checkpoint_best.fsvi", best);

  write_file_atomic(cfg.output_dir + "/history.csv",
                    fsvi::history_csv(result.history));

  // Final report on the held-out split (test when available, else
  // validation), in original units.
  const std::vector<double> rates =
      cfg.referral_rates.empty() ? default_rates() : cfg.referral_rates;
  fsvi::Dataset report_set_raw;
  if (test_raw)
    report_set_raw = *test_raw;
  else {
    // Validation rows are standardized; rebuild raw rows via the stats.
    report_set_raw = val_split;
    if (val_split.x_stats) {
      for (std::size_t r = 0; r < report_set_raw.X.rows(); ++r)
        for (std::size_t c = 0; c < report_set_raw.X.cols(); ++c)
          report_set_raw.X(r, c) =
              report_set_raw.X(r, c) * val_split.x_stats->sd[c] +
              val_split.x_stats->mean[c];
    }
    if (val_split.y_stats && !cfg.classification)
      report_set_raw.y =
          fsvi::unstandardize_targets(report_set_raw.y, *val_split.y_stats);
  }
  const auto report =
      evaluate_dataset(ckpt, report_set_raw, cfg.eval_mc_samples, rates,
                       cfg.seed + 17, std::nullopt, nullptr, nullptr);
  write_file_atomic(cfg.output_dir + "/metrics.json", report.to_json() + "\n");
  write_file_atomic(cfg.output_dir + "/selective.csv",
                    fsvi::selective_csv(report.selective));
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path,
                 const std::string& data_path,
                 std::optional<std::string> ood_path, const std::string& out,
                 std::optional<std::string> config_path,
                 std::uint64_t seed) {
  const auto ckpt = fsvi::load_checkpoint(checkpoint_path);
  std::size_t mc = 50;
  std::vector<double> rates = default_rates();
  std::vector<std::size_t> target_columns;
  bool has_header = false;
  if (config_path) {
    const json raw = load_json(*config_path);
    const RunConfig cfg = parse_config(raw);
    mc = cfg.eval_mc_samples;
    if (!cfg.referral_rates.empty()) rates = cfg.referral_rates;
    target_columns = cfg.target_columns;
    has_header = cfg.has_header;
  }
  if (target_columns.empty()) {
    // Default layout: targets in the trailing columns (datagen convention).
    fsvi::Dataset probe = fsvi::load_csv(data_path, {}, has_header);
    const std::size_t width = probe.X.cols();
    const std::size_t q =
        ckpt.classification ? 1 : ckpt.spec.output_dim();
    if (width < ckpt.spec.input_dim() + q)
      throw fsvi::ConfigError("evaluate: csv narrower than model inputs");
    for (std::size_t c = width - q; c < width; ++c)
      target_columns.push_back(c);
  }
  fsvi::Dataset data = fsvi::load_csv(data_path, target_columns, has_header);
  data.classification = ckpt.classification;

  std::optional<fsvi::Dataset> ood;
  if (ood_path) {
    ood = fsvi::load_csv(*ood_path, {}, has_header);
    if (ood->X.cols() == ckpt.spec.input_dim() + target_columns.size()) {
      // Labelled OOD file: drop the trailing target columns.
      fsvi::Matrix trimmed(ood->X.rows(), ckpt.spec.input_dim());
      for (std::size_t r = 0; r < trimmed.rows(); ++r)
        for (std::size_t c = 0; c < trimmed.cols(); ++c)
          trimmed(r, c) = ood->X(r, c);
      ood->X = trimmed;
    }
  }

  std::string entropy_in, entropy_out;
  const auto report = evaluate_dataset(ckpt, data, mc, rates, seed, ood,
                                       &entropy_in, &entropy_out);
  fs::create_directories(out);
  write_file_atomic(out + "/metrics.json", report.to_json() + "\n");
  write_file_atomic(out + "/selective.csv",
                    fsvi::selective_csv(report.selective));
  if (ood) {
    write_file_atomic(out + "/entropy_in.csv", entropy_in);
    write_file_atomic(out + "/entropy_out.csv", entropy_out);
  }
  return 0;
}

int cmd_predict(const std::string& checkpoint_path,
                const std::string& data_path, const std::string& out,
                std::uint64_t seed) {
  const auto ckpt = fsvi::load_checkpoint(checkpoint_path);
  fsvi::Dataset data = fsvi::load_csv(data_path, {}, false);
  if (data.X.cols() != ckpt.spec.input_dim())
    throw fsvi::ConfigError("predict: csv width != model input dimension");
  if (ckpt.x_stats) {
    for (std::size_t r = 0; r < data.X.rows(); ++r)
      for (std::size_t c = 0; c < data.X.cols(); ++c)
        data.X(r, c) =
            (data.X(r, c) - ckpt.x_stats->mean[c]) / ckpt.x_stats->sd[c];
  }
  const auto pred = fsvi::posterior_predictive(ckpt.posterior, ckpt.spec,
                                               data.X, ckpt.likelihood, 50,
                                               fsvi::RngKey{seed});
  std::ostringstream os;
  os.precision(17);
  const std::size_t Q = pred.mean.cols();
  if (pred.classification) {
    for (std::size_t c = 0; c < Q; ++c) os << "p" << c << ",";
    os << "entropy\n";
    for (std::size_t r = 0; r < pred.mean.rows(); ++r) {
      for (std::size_t c = 0; c < Q; ++c) os << pred.mean(r, c) << ",";
      os << pred.entropy[r] << "\n";
    }
  } else {
    fsvi::Matrix mean = pred.mean;
    fsvi::Matrix var = pred.variance;
    if (ckpt.y_stats) {
      mean = fsvi::unstandardize_targets(mean, *ckpt.y_stats);
      var = fsvi::unstandardize_variance(var, *ckpt.y_stats);
    }
    for (std::size_t c = 0; c < Q; ++c)
      os << "mean" << c << ",variance" << c << ",";
    os << "entropy\n";
    for (std::size_t r = 0; r < mean.rows(); ++r) {
      for (std::size_t c = 0; c < Q; ++c)
        os << mean(r, c) << "," << var(r, c) << ",";
      os << pred.entropy[r] << "\n";
    }
  }
  fs::create_directories(fs::path(out).parent_path().empty()
                             ? "."
                             : fs::path(out).parent_path().string());
  write_file_atomic(out, os.str());
  return 0;
}

int cmd_datagen(const std::string& config_path, const std::string& out,
                std::optional<std::uint64_t> seed) {
  const json j = load_json(config_path);
  reject_unknown_keys(j, {"kind", "n", "noise_sd", "seed"}, "datagen config");
  const std::string kind = j.at("kind").get<std::string>();
  const std::size_t n = j.value("n", 200u);
  const double noise = j.value("noise_sd", 0.1);
  const std::uint64_t s = seed ? *seed : j.value("seed", 0ull);
  fsvi::Dataset d;
  if (kind == "two_moons")
    d = fsvi::two_moons(n, noise, fsvi::RngKey{s ^ 0xD47AB7ull});
  else if (kind == "gap_sine")
    d = fsvi::synthetic_1d(fsvi::Synthetic1dKind::GapSine, n, noise,
                           fsvi::RngKey{s ^ 0xD47AB7ull});
  else
    throw fsvi::ConfigError("datagen: unknown kind " + kind);
  const fs::path parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_file_atomic(out, fsvi::dataset_csv(d));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Function-space variational inference for MLPs"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, data_path, out_path = "out";
  std::string ood_path;
  std::int64_t seed_flag = -1;
  int threads_flag = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "override the config seed");
    cmd->add_option("--threads", threads_flag,
                    "worker thread cap (0 = all cores)");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train from a config");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--out", out_path);
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--ood", ood_path);
  eval_cmd->add_option("--config", config_path);
  eval_cmd->add_option("--out", out_path);
  add_common(eval_cmd);

  CLI::App* predict_cmd = app.add_subcommand("predict", "per-row predictions");
  predict_cmd->add_option("--checkpoint", checkpoint_path)->required();
  predict_cmd->add_option("--data", data_path)->required();
  predict_cmd->add_option("--out", out_path);
  add_common(predict_cmd);

  CLI::App* datagen_cmd = app.add_subcommand("datagen", "write generator CSV");
  datagen_cmd->add_option("--config", config_path)->required();
  datagen_cmd->add_option("--out", out_path)->required();
  add_common(datagen_cmd);

  CLI11_PARSE(app, argc, argv);

  // Thread cap: flag wins, then FSVI_THREADS, then all cores.
  if (threads_flag >= 0) {
    fsvi::set_threads(threads_flag);
  } else if (const char* env = std::getenv("FSVI_THREADS")) {
    fsvi::set_threads(std::atoi(env));
  }

  std::optional<std::uint64_t> seed;
  if (seed_flag >= 0) seed = static_cast<std::uint64_t>(seed_flag);

  try {
    if (train_cmd->parsed())
      return cmd_train(config_path, seed,
                       train_cmd->count("--out") ? std::optional(out_path)
                                                 : std::nullopt);
    if (eval_cmd->parsed())
      return cmd_evaluate(checkpoint_path, data_path,
                          eval_cmd->count("--ood") ? std::optional(ood_path)
                                                   : std::nullopt,
                          out_path,
                          eval_cmd->count("--config")
                              ? std::optional(config_path)
                              : std::nullopt,
                          seed ? *seed : 0);
    if (predict_cmd->parsed())
      return cmd_predict(checkpoint_path, data_path, out_path,
                         seed ? *seed : 0);
    if (datagen_cmd->parsed()) return cmd_datagen(config_path, out_path, seed);
  } catch (const fsvi::FactorizationFailed& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const fsvi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
