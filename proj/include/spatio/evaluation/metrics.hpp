#pragma once

// Error metrics, seed aggregation, significance tests and the CSV tables that
// carry them.

#include <cstddef>
#include <filesystem>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spatio::evaluation {

/// Mean absolute error over equally sized ranges. Throws std::invalid_argument
/// on empty or mismatched input.
double mae(std::span<const double> pred, std::span<const double> target);
/// Root mean squared error, same contract as mae().
double rmse(std::span<const double> pred, std::span<const double> target);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// Incidence forecasts of one model over a contiguous run of test samples.
/// Sample s covers forecast days first_day + s .. first_day + s + F - 1.
struct ForecastSet {
  std::size_t nodes = 0;
  std::size_t horizon = 0;
  /// Per sample, N x F values in node-major order.
  std::vector<std::vector<double>> predictions;
  std::vector<std::vector<double>> targets;

  void add(std::vector<double> prediction, std::vector<double> target);
  std::size_t samples() const { return predictions.size(); }
  /// Distinct forecast days: samples + F - 1.
  std::size_t timesteps() const;
};

/// Each forecast day scored once: the prediction for a (node, day) is the
/// mean of every sample's forecast for it.
Metrics deoverlapped_metrics(const ForecastSet& set);
/// Every (sample, node, horizon step) scored as its own element.
Metrics pooled_metrics(const ForecastSet& set);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

/// Throws std::invalid_argument for an empty input.
Summary aggregate(std::span<const double> values);

enum class Sided {
  kLess,     // alternative: mean(a) < mean(b)
  kGreater,  // alternative: mean(a) > mean(b)
  kTwo,
};

const char* sided_name(Sided sided);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  Sided sided = Sided::kTwo;
  double alpha = 0.05;

  bool significant() const { return p < alpha; }
};

/// CDF of Student's t with `df` degrees of freedom through the regularized
/// incomplete beta function.
double student_t_cdf(double t, double df);

/// Two-sample independent t-test. Welch's unequal-variance statistic with
/// Welch-Satterthwaite degrees of freedom by default; `pooled` switches to the
/// equal-variance form. Needs at least two values per sample and a nonzero
/// standard error.
TTestResult t_test(std::span<const double> a, std::span<const double> b, Sided sided,
                   bool pooled = false);

struct MetricRecord {
  std::string region_set;
  std::string fold;  // "1".."5" or "final"
  std::size_t horizon = 0;
  std::string variant;
  std::string channels;
  std::uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);

/// Per (region_set, fold, horizon, variant, channels) group: mean and sample
/// std of MAE and RMSE over seeds.
struct AggregateRow {
  std::string region_set;
  std::string fold;
  std::size_t horizon = 0;
  std::string variant;
  std::string channels;
  Summary mae;
  Summary rmse;
};

std::vector<AggregateRow> aggregate_records(const std::vector<MetricRecord>& records);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);

/// Record field a comparison splits on.
enum class ComparisonAxis { kChannels, kVariant };

/// One column of the comparison table: records whose channel set (or variant)
/// is `lhs` against those with `rhs`, labelled "<lhs> vs. <rhs>".
struct Comparison {
  std::string lhs;
  std::string rhs;
  Sided sided = Sided::kLess;
  ComparisonAxis axis = ComparisonAxis::kChannels;

  std::string label() const { return lhs + " vs. " + rhs; }
};

struct TTestCell {
  std::string label;
  std::optional<TTestResult> result;  // empty when either side lacks samples
};

/// One row per (metric, region set), one cell per comparison.
struct TTestRow {
  std::string metric;  // "MAE" or "RMSE"
  std::string region_set;
  std::vector<TTestCell> cells;
};

std::vector<TTestRow> t_test_table(const std::vector<MetricRecord>& records,
                                   const std::vector<Comparison>& comparisons, bool pooled = false);
/// `metric,region_set,<label>,...` with p values; empty cells for missing data.
void write_t_test_csv(const std::vector<TTestRow>& rows, const std::filesystem::path& path);

}  // namespace spatio::evaluation
