#include "fsvi/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fsvi/errors.hpp"

namespace fsvi {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i)
    out[i] = static_cast<int>(y(i, 0));
  return out;
}

Dataset two_moons(std::size_t n, double noise_sd, RngKey key) {
  if (n < 2) throw ConfigError("two_moons: need at least 2 points");
  const std::size_t n0 = n / 2 + (n % 2);  // class 0 gets the odd point
  const std::size_t n1 = n - n0;
  Dataset d;
  d.classification = true;
  d.X = Matrix(n, 2);
  d.y = Matrix(n, 1);
  Rng rng(key);
  for (std::size_t i = 0; i < n; ++i) {
    const bool upper = i < n0;
    const std::size_t m = upper ? n0 : n1;
    const std::size_t j = upper ? i : i - n0;
    const double t =
        m > 1 ? kPi * static_cast<double>(j) / static_cast<double>(m - 1)
              : 0.0;
    double x0, x1;
    if (upper) {
      x0 = std::cos(t);
      x1 = std::sin(t);
    } else {
      x0 = 1.0 - std::cos(t);
      x1 = 0.5 - std::sin(t);
    }
    d.X(i, 0) = x0 + noise_sd * rng.normal();
    d.X(i, 1) = x1 + noise_sd * rng.normal();
    d.y(i, 0) = upper ? 0.0 : 1.0;
  }
  return d;
}

Dataset synthetic_1d(Synthetic1dKind kind, std::size_t n, double noise_sd,
                     RngKey key) {
  if (kind != Synthetic1dKind::GapSine)
    throw ConfigError("synthetic_1d: unknown kind");
  if (n < 2) throw ConfigError("synthetic_1d: need at least 2 points");
  Dataset d;
  d.X = Matrix(n, 1);
  d.y = Matrix(n, 1);
  Rng rng(key);
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = i < n / 2;
    const double x =
        left ? rng.uniform(-2.0, -0.5) : rng.uniform(0.5, 2.0);
    d.X(i, 0) = x;
    d.y(i, 0) = std::sin(3.0 * x) + noise_sd * rng.normal();
  }
  return d;
}

Dataset load_csv(const std::string& path,
                 const std::vector<std::size_t>& target_columns,
                 bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path, 0);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && has_header) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        cells.push_back(std::stod(cell, &pos));
        while (pos < cell.size() && std::isspace(
                   static_cast<unsigned char>(cell[pos])))
          ++pos;
        if (pos != cell.size())
          throw ParseError("load_csv: non-numeric cell '" + cell + "'",
                           line_no);
      } catch (const ParseError&) {
        throw;
      } catch (...) {
        throw ParseError("load_csv: non-numeric cell '" + cell + "'", line_no);
      }
    }
    if (width == 0)
      width = cells.size();
    else if (cells.size() != width)
      throw RaggedRows("load_csv: row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(width));
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw EmptyData("load_csv: no data rows in " + path);

  for (std::size_t t : target_columns)
    if (t >= width)
      throw ConfigError("load_csv: target column out of range");

  Dataset d;
  const std::size_t n_targets = target_columns.size();
  d.X = Matrix(rows.size(), width - n_targets);
  d.y = Matrix(rows.size(), std::max<std::size_t>(n_targets, 1));
  std::vector<bool> is_target(width, false);
  for (std::size_t t : target_columns) is_target[t] = true;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t xc = 0;
    for (std::size_t c = 0; c < width; ++c)
      if (!is_target[c]) d.X(r, xc++) = rows[r][c];
    for (std::size_t t = 0; t < n_targets; ++t)
      d.y(r, t) = rows[r][target_columns[t]];
  }
  return d;
}

namespace {

ColumnStats compute_stats(const Matrix& m) {
  ColumnStats s;
  const std::size_t n = m.rows();
  s.mean.assign(m.cols(), 0.0);
  s.sd.assign(m.cols(), 1.0);
  s.scaled.assign(m.cols(), true);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += m(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = m(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    s.mean[c] = mu;
    if (var > 0.0) {
      s.sd[c] = std::sqrt(var);
    } else {
      s.sd[c] = 1.0;  // constant column left unscaled
      s.scaled[c] = false;
    }
  }
  return s;
}

void apply_stats(Matrix& m, const ColumnStats& s) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      m(r, c) = (m(r, c) - s.mean[c]) / s.sd[c];
}

}  // namespace

StandardizeResult standardize(const Dataset& train,
                              const std::vector<Dataset>& others) {
  if (train.size() == 0) throw EmptyData("standardize: empty training split");
  StandardizeResult out;
  out.x_stats = compute_stats(train.X);
  out.train = train;
  apply_stats(out.train.X, out.x_stats);
  out.train.x_stats = out.x_stats;
  if (!train.classification) {
    out.y_stats = compute_stats(train.y);
    apply_stats(out.train.y, *out.y_stats);
    out.train.y_stats = out.y_stats;
  }
  for (const Dataset& o : others) {
    Dataset t = o;
    apply_stats(t.X, out.x_stats);
    t.x_stats = out.x_stats;
    if (!t.classification && out.y_stats) {
      apply_stats(t.y, *out.y_stats);
      t.y_stats = out.y_stats;
    }
    out.others.push_back(std::move(t));
  }
  return out;
}

Matrix unstandardize_targets(const Matrix& y, const ColumnStats& stats) {
  Matrix out = y;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = out(r, c) * stats.sd[c] + stats.mean[c];
  return out;
}

Matrix unstandardize_variance(const Matrix& var, const ColumnStats& stats) {
  Matrix out = var;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = out(r, c) * stats.sd[c] * stats.sd[c];
  return out;
}

std::vector<Dataset> split(const Dataset& dataset,
                           const std::vector<double>& fractions, RngKey key) {
  if (fractions.empty()) throw InvalidFractions("split: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw InvalidFractions("split: negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InvalidFractions("split: fractions must sum to 1");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(key);
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(order[i], order[j]);
  }

  // Cumulative rounding keeps every split within one row of its fraction.
  std::vector<std::size_t> cuts(fractions.size() + 1, 0);
  double acc = 0.0;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    acc += fractions[s];
    cuts[s + 1] = static_cast<std::size_t>(
        std::floor(acc * static_cast<double>(n) + 0.5));
  }
  cuts.back() = n;

  std::vector<Dataset> out;
  for (std::size_t s = 0; s < fractions.size(); ++s) {
    Dataset part;
    part.classification = dataset.classification;
    part.x_stats = dataset.x_stats;
    part.y_stats = dataset.y_stats;
    const std::size_t count = cuts[s + 1] - cuts[s];
    part.X = Matrix(count, dataset.X.cols());
    part.y = Matrix(count, dataset.y.cols());
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t src = order[cuts[s] + r];
      for (std::size_t c = 0; c < dataset.X.cols(); ++c)
        part.X(r, c) = dataset.X(src, c);
      for (std::size_t c = 0; c < dataset.y.cols(); ++c)
        part.y(r, c) = dataset.y(src, c);
    }
    out.push_back(std::move(part));
  }
  return out;
}

std::string dataset_csv(const Dataset& data) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < data.X.cols(); ++c) os << data.X(r, c) << ",";
    for (std::size_t c = 0; c < data.y.cols(); ++c) {
      if (c) os << ",";
      os << data.y(r, c);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace fsvi
