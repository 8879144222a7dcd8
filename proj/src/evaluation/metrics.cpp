#include "spatio/evaluation/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

#include "spatio/util/csv.hpp"

namespace spatio::evaluation {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw std::invalid_argument("metrics need at least one element");
  if (pred.size() != target.size()) {
    throw std::invalid_argument("metric inputs differ in length: " + std::to_string(pred.size()) + " vs " +
                                std::to_string(target.size()));
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double sample_variance(std::span<const double> x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> target) {
  check_pair(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> target) {
  check_pair(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

void ForecastSet::add(std::vector<double> prediction, std::vector<double> target) {
  if (prediction.size() != nodes * horizon || target.size() != nodes * horizon) {
    throw std::invalid_argument("forecast block must hold N x F values");
  }
  predictions.push_back(std::move(prediction));
  targets.push_back(std::move(target));
}

std::size_t ForecastSet::timesteps() const { return samples() == 0 ? 0 : samples() + horizon - 1; }

Metrics deoverlapped_metrics(const ForecastSet& set) {
  const std::size_t days = set.timesteps();
  if (days == 0) throw std::invalid_argument("no forecasts to score");
  std::vector<double> pred_sum(set.nodes * days, 0.0), truth(set.nodes * days, 0.0);
  std::vector<std::size_t> hits(set.nodes * days, 0);
  for (std::size_t s = 0; s < set.samples(); ++s) {
    for (std::size_t n = 0; n < set.nodes; ++n) {
      for (std::size_t h = 0; h < set.horizon; ++h) {
        const std::size_t cell = n * days + s + h;
        pred_sum[cell] += set.predictions[s][n * set.horizon + h];
        truth[cell] = set.targets[s][n * set.horizon + h];
        ++hits[cell];
      }
    }
  }
  for (std::size_t i = 0; i < pred_sum.size(); ++i) pred_sum[i] /= static_cast<double>(hits[i]);
  return {mae(pred_sum, truth), rmse(pred_sum, truth), pred_sum.size()};
}

Metrics pooled_metrics(const ForecastSet& set) {
  std::vector<double> pred, truth;
  for (std::size_t s = 0; s < set.samples(); ++s) {
    pred.insert(pred.end(), set.predictions[s].begin(), set.predictions[s].end());
    truth.insert(truth.end(), set.targets[s].begin(), set.targets[s].end());
  }
  return {mae(pred, truth), rmse(pred, truth), pred.size()};
}

Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot aggregate an empty group");
  Summary s;
  s.n = values.size();
  s.mean = mean_of(values);
  const bool constant = std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
  s.std = constant ? 0.0 : std::sqrt(sample_variance(values, s.mean));
  return s;
}

const char* sided_name(Sided sided) {
  switch (sided) {
    case Sided::kLess: return "one_less";
    case Sided::kGreater: return "one_greater";
    case Sided::kTwo: return "two";
  }
  return "?";
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  // P(T < -|t|) = I_{df/(df+t^2)}(df/2, 1/2) / 2
  const double x = df / (df + t * t);
  const double tail = 0.5 * boost::math::ibeta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b, Sided sided, bool pooled) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("t-test needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
  double se2 = 0.0;
  TTestResult r;
  r.sided = sided;
  if (pooled) {
    const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    se2 = sp2 * (1.0 / na + 1.0 / nb);
    r.df = na + nb - 2.0;
  } else {
    const double qa = va / na, qb = vb / nb;
    se2 = qa + qb;
    r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  }
  if (!(se2 > 0.0)) throw std::invalid_argument("t-test is undefined for zero variance in both samples");
  r.t = (ma - mb) / std::sqrt(se2);
  const double lower = student_t_cdf(r.t, r.df);   // P(T <= t)
  const double upper = student_t_cdf(-r.t, r.df);  // P(T >= t)
  switch (sided) {
    case Sided::kLess: r.p = lower; break;
    case Sided::kGreater: r.p = upper; break;
    case Sided::kTwo: r.p = std::min(1.0, 2.0 * std::min(lower, upper)); break;
  }
  return r;
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region_set,fold,horizon,variant,channels,seed,mae,rmse\n";
  for (const auto& r : records) {
    out << r.region_set << ',' << r.fold << ',' << r.horizon << ',' << r.variant << ',' << r.channels << ','
        << r.seed << ',' << format_double(r.mae) << ',' << format_double(r.rmse) << '\n';
  }
}

std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path) {
  util::CsvReader reader(path);
  reader.expect_header({"region_set", "fold", "horizon", "variant", "channels", "seed", "mae", "rmse"});
  std::vector<MetricRecord> out;
  while (auto row = reader.next()) {
    if (row->size() != 8) reader.fail("expected 8 fields");
    MetricRecord r;
    r.region_set = (*row)[0];
    r.fold = (*row)[1];
    r.horizon = static_cast<std::size_t>(reader.parse_double((*row)[2]));
    r.variant = (*row)[3];
    r.channels = (*row)[4];
    r.seed = static_cast<std::uint64_t>(std::stoull((*row)[5]));
    r.mae = reader.parse_double((*row)[6]);
    r.rmse = reader.parse_double((*row)[7]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AggregateRow> aggregate_records(const std::vector<MetricRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::string, std::string>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.region_set, r.fold, r.horizon, r.variant, r.channels}];
    g.first.push_back(r.mae);
    g.second.push_back(r.rmse);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    std::tie(row.region_set, row.fold, row.horizon, row.variant, row.channels) = key;
    row.mae = aggregate(values.first);
    row.rmse = aggregate(values.second);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region_set,fold,horizon,variant,channels,runs,mae_mean,mae_std,rmse_mean,rmse_std\n";
  for (const auto& r : rows) {
    out << r.region_set << ',' << r.fold << ',' << r.horizon << ',' << r.variant << ',' << r.channels << ','
        << r.mae.n << ',' << format_double(r.mae.mean) << ',' << format_double(r.mae.std) << ','
        << format_double(r.rmse.mean) << ',' << format_double(r.rmse.std) << '\n';
  }
}

std::vector<TTestRow> t_test_table(const std::vector<MetricRecord>& records,
                                   const std::vector<Comparison>& comparisons, bool pooled) {
  std::set<std::string> region_sets;
  for (const auto& r : records) region_sets.insert(r.region_set);
  std::vector<TTestRow> rows;
  for (const char* metric : {"MAE", "RMSE"}) {
    const bool is_mae = std::string(metric) == "MAE";
    for (const auto& region_set : region_sets) {
      TTestRow row{metric, region_set, {}};
      for (const auto& cmp : comparisons) {
        std::vector<double> a, b;
        for (const auto& r : records) {
          if (r.region_set != region_set) continue;
          const double v = is_mae ? r.mae : r.rmse;
          const std::string& key = cmp.axis == ComparisonAxis::kChannels ? r.channels : r.variant;
          if (key == cmp.lhs) a.push_back(v);
          if (key == cmp.rhs) b.push_back(v);
        }
        TTestCell cell{cmp.label(), std::nullopt};
        if (a.size() >= 2 && b.size() >= 2) {
          try {
            cell.result = t_test(a, b, cmp.sided, pooled);
          } catch (const std::invalid_argument&) {
            // Constant, identical samples: no test is defined.
          }
        }
        row.cells.push_back(std::move(cell));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_t_test_csv(const std::vector<TTestRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric,region_set";
  if (!rows.empty()) {
    for (const auto& cell : rows.front().cells) out << ',' << cell.label;
  }
  out << '\n';
  for (const auto& row : rows) {
    out << row.metric << ',' << row.region_set;
    for (const auto& cell : row.cells) {
      out << ',';
      if (cell.result) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", cell.result->p);
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace spatio::evaluation
