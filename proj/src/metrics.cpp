#include "fsvi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fsvi/errors.hpp"

namespace fsvi {

double ece(const Matrix& probs, std::span<const int> labels,
           std::size_t bins) {
  if (probs.rows() == 0) throw EmptyInput("ece: no predictions");
  if (probs.rows() != labels.size())
    throw DimensionMismatch("ece: label count mismatch");
  std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t arg = 0;
    double conf = probs(i, 0);
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(i, c) > conf) {
        conf = probs(i, c);
        arg = c;
      }
    auto b = static_cast<std::size_t>(conf * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;  // confidence exactly 1 falls in the last bin
    conf_sum[b] += conf;
    acc_sum[b] += (static_cast<int>(arg) == labels[i]) ? 1.0 : 0.0;
    count[b] += 1;
  }
  double e = 0.0;
  const double n = static_cast<double>(probs.rows());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double w = static_cast<double>(count[b]) / n;
    const double gap = std::abs(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    e += w * gap;
  }
  return e;
}

double auroc(std::span<const double> scores_in,
             std::span<const double> scores_out) {
  if (scores_in.empty() || scores_out.empty())
    throw EmptyInput("auroc: both score lists must be nonempty");
  // Counting over the sorted in-scores keeps this O((m+n) log(m+n)).
  std::vector<double> in_sorted(scores_in.begin(), scores_in.end());
  std::sort(in_sorted.begin(), in_sorted.end());
  double favorable = 0.0;
  for (double s : scores_out) {
    const auto lo = std::lower_bound(in_sorted.begin(), in_sorted.end(), s);
    const auto hi = std::upper_bound(lo, in_sorted.end(), s);
    favorable += static_cast<double>(lo - in_sorted.begin());
    favorable += 0.5 * static_cast<double>(hi - lo);
  }
  return favorable /
         (static_cast<double>(scores_in.size()) * scores_out.size());
}

double brier(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw DimensionMismatch("brier: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      const double target = (static_cast<int>(c) == labels[i]) ? 1.0 : 0.0;
      const double d = probs(i, c) - target;
      total += d * d;
    }
  }
  return total / static_cast<double>(probs.rows());
}

std::vector<double> predictive_entropy(const Matrix& probs) {
  std::vector<double> h(probs.rows(), 0.0);
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      if (p > 0.0) h[i] -= p * std::log(p);
    }
  return h;
}

std::vector<SelectivePoint> selective_prediction(
    std::span<const double> uncertainty,
    const std::function<double(std::span<const std::size_t>)>& metric_fn,
    std::span<const double> referral_rates) {
  const std::size_t n = uncertainty.size();
  for (std::size_t i = 1; i < referral_rates.size(); ++i)
    if (!(referral_rates[i] > referral_rates[i - 1]))
      throw ConfigError("selective_prediction: rates must strictly increase");
  for (double r : referral_rates)
    if (r < 0.0 || r >= 1.0)
      throw ConfigError("selective_prediction: rates must lie in [0, 1)");

  // Drop order: most uncertain first; equal scores drop higher index first.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (uncertainty[a] != uncertainty[b])
      return uncertainty[a] > uncertainty[b];
    return a > b;
  });

  std::vector<SelectivePoint> table;
  table.reserve(referral_rates.size());
  for (double gamma : referral_rates) {
    const auto dropped = static_cast<std::size_t>(
        std::ceil(gamma * static_cast<double>(n)));
    if (dropped >= n)
      throw EmptyRetainedSet("selective_prediction: nothing retained");
    std::vector<std::size_t> retained(order.begin() + dropped, order.end());
    std::sort(retained.begin(), retained.end());
    table.push_back({gamma, metric_fn(retained)});
  }
  return table;
}

double accuracy(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw DimensionMismatch("accuracy: label count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(i, c) > probs(i, arg)) arg = c;
    if (static_cast<int>(arg) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

double regression_nll(const Matrix& pred_mean, const Matrix& pred_var,
                      const Matrix& y) {
  if (pred_mean.rows() != y.rows() || pred_mean.cols() != y.cols())
    throw DimensionMismatch("regression_nll: shape mismatch");
  constexpr double kTwoPi = 6.28318530717958647692;
  double total = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double v = pred_var(i, c);
      const double d = y(i, c) - pred_mean(i, c);
      total += 0.5 * std::log(kTwoPi * v) + 0.5 * d * d / v;
    }
  return total / static_cast<double>(y.rows());
}

double classification_nll(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw DimensionMismatch("classification_nll: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const double p = std::max(probs(i, static_cast<std::size_t>(labels[i])),
                              1e-300);
    total -= std::log(p);
  }
  return total / static_cast<double>(probs.rows());
}

double rmse(const Matrix& pred_mean, const Matrix& y) {
  if (pred_mean.rows() != y.rows() || pred_mean.cols() != y.cols())
    throw DimensionMismatch("rmse: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double d = pred_mean(i, c) - y(i, c);
      total += d * d;
    }
  return std::sqrt(total / static_cast<double>(y.rows() * y.cols()));
}

namespace {
void append_field(std::ostringstream& os, bool& first, const std::string& name,
                  double value) {
  if (!first) os << ",";
  first = false;
  os << "\"" << name << "\":" << value;
}
}  // namespace

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{";
  bool first = true;
  if (nll) append_field(os, first, "nll", *nll);
  if (rmse) append_field(os, first, "rmse", *rmse);
  if (accuracy) append_field(os, first, "accuracy", *accuracy);
  if (ece) append_field(os, first, "ece", *ece);
  if (brier) append_field(os, first, "brier", *brier);
  if (auroc) append_field(os, first, "auroc", *auroc);
  if (mean_entropy) append_field(os, first, "mean_entropy", *mean_entropy);
  if (!selective.empty()) {
    if (!first) os << ",";
    first = false;
    os << "\"selective\":[";
    for (std::size_t i = 0; i < selective.size(); ++i) {
      if (i) os << ",";
      os << "{\"referral_rate\":" << selective[i].referral_rate
         << ",\"metric\":" << selective[i].metric << "}";
    }
    os << "]";
  }
  os << "}";
  return os.str();
}

std::string selective_csv(const std::vector<SelectivePoint>& table) {
  std::ostringstream os;
  os.precision(12);
  os << "referral_rate,metric\n";
  for (const auto& p : table)
    os << p.referral_rate << "," << p.metric << "\n";
  return os.str();
}

}  // namespace fsvi
