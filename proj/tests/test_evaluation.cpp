#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "spatio/evaluation/metrics.hpp"
#include "test_util.hpp"

namespace ev = spatio::evaluation;
using spatio::testing::TempDir;

namespace {

double t_density(double x, double df) {
  const double log_c = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_c - (df + 1) / 2 * std::log1p(x * x / df));
}

// P(T <= t) by Simpson integration of the density; the lower tail is mapped
// onto (0, 1] through x = t / u^2, which keeps the integrand smooth at u = 0.
double t_cdf_oracle(double t, double df) {
  if (t > 0) return 1.0 - t_cdf_oracle(-t, df);
  if (t == 0) return 0.5;
  const int n = 200000;
  const double h = 1.0 / n;
  auto g = [&](double u) {
    if (u == 0.0) return 0.0;
    const double s = u * u;
    return t_density(t / s, df) * std::fabs(t) / (s * s) * 2.0 * u;
  };
  double acc = g(0.0) + g(1.0);
  for (int i = 1; i < n; ++i) acc += g(i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST(Metrics, ClosedForms) {
  const std::vector<double> t{1, 2, 3};
  EXPECT_EQ(ev::mae(t, t), 0.0);
  EXPECT_EQ(ev::rmse(t, t), 0.0);
  const std::vector<double> p{3, -3}, z{0, 0};
  EXPECT_DOUBLE_EQ(ev::mae(p, z), 3.0);
  EXPECT_DOUBLE_EQ(ev::rmse(p, z), 3.0);
  const std::vector<double> q{0, 4};
  EXPECT_DOUBLE_EQ(ev::mae(q, z), 2.0);
  EXPECT_DOUBLE_EQ(ev::rmse(q, z), std::sqrt(8.0));
  EXPECT_THROW(ev::mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(ev::rmse(t, z), std::invalid_argument);
}

TEST(Metrics, InvariantUnderNodePermutation) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist;
  std::vector<double> p(20), t(20);
  for (std::size_t i = 0; i < 20; ++i) p[i] = dist(rng), t[i] = dist(rng);
  std::vector<std::size_t> idx(20);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> pp(20), tp(20);
  for (std::size_t i = 0; i < 20; ++i) pp[i] = p[idx[i]], tp[i] = t[idx[i]];
  EXPECT_NEAR(ev::mae(p, t), ev::mae(pp, tp), 1e-15);
  EXPECT_NEAR(ev::rmse(p, t), ev::rmse(pp, tp), 1e-15);
}

TEST(ForecastSet, DeoverlapAveragesEachDayOnce) {
  ev::ForecastSet set{1, 2, {}, {}};
  // Days 0..2; day 1 is forecast by both samples (3 and 5 -> mean 4).
  set.add({1, 3}, {0, 4});
  set.add({5, 10}, {4, 8});
  EXPECT_EQ(set.timesteps(), 3u);
  const auto d = ev::deoverlapped_metrics(set);
  EXPECT_EQ(d.count, 3u);
  EXPECT_DOUBLE_EQ(d.mae, (1.0 + 0.0 + 2.0) / 3.0);
  EXPECT_DOUBLE_EQ(d.rmse, std::sqrt((1.0 + 0.0 + 4.0) / 3.0));
  const auto p = ev::pooled_metrics(set);
  EXPECT_EQ(p.count, 4u);
  EXPECT_DOUBLE_EQ(p.mae, (1.0 + 1.0 + 1.0 + 2.0) / 4.0);
  EXPECT_THROW(set.add({1}, {1}), std::invalid_argument);
}

TEST(Aggregate, MeanAndSampleStd) {
  const std::vector<double> one{4.2};
  EXPECT_EQ(ev::aggregate(one).std, 0.0);
  const std::vector<double> three{1, 2, 3};
  EXPECT_DOUBLE_EQ(ev::aggregate(three).mean, 2.0);
  EXPECT_DOUBLE_EQ(ev::aggregate(three).std, 1.0);
  const std::vector<double> same(7, 0.1);
  EXPECT_EQ(ev::aggregate(same).std, 0.0);
  EXPECT_THROW(ev::aggregate(std::vector<double>{}), std::invalid_argument);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-10, 10);
  std::vector<double> v(5);
  for (auto& x : v) x = dist(rng);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= 5.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(ev::aggregate(v).mean, mean, 1e-14);
  EXPECT_NEAR(ev::aggregate(v).std, std::sqrt(ss / 4.0), 1e-14);
}

TEST(StudentT, CdfMatchesIntegratedDensity) {
  for (double df : {1.5, 3.0, 8.0, 27.3}) {
    for (double t : {-6.0, -2.1, -0.4, 0.0, 0.9, 3.3}) {
      EXPECT_NEAR(ev::student_t_cdf(t, df), t_cdf_oracle(t, df), 1e-9) << "t=" << t << " df=" << df;
    }
  }
}

TEST(TTest, IdenticalSamples) {
  const std::vector<double> a{1.0, 2.5, 3.0, 4.5};
  const auto less = ev::t_test(a, a, ev::Sided::kLess);
  EXPECT_EQ(less.t, 0.0);
  EXPECT_DOUBLE_EQ(less.p, 0.5);
  EXPECT_DOUBLE_EQ(ev::t_test(a, a, ev::Sided::kTwo).p, 1.0);
}

TEST(TTest, ComplementAndTwoSidedIdentities) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(3 + trial % 5), b(2 + trial % 7);
    for (auto& x : a) x = dist(rng);
    for (auto& x : b) x = dist(rng) + 0.3;
    const double ab = ev::t_test(a, b, ev::Sided::kLess).p;
    const double ba = ev::t_test(b, a, ev::Sided::kLess).p;
    EXPECT_NEAR(ab + ba, 1.0, 1e-12);
    EXPECT_NEAR(ev::t_test(a, b, ev::Sided::kGreater).p, ba, 1e-15);
    EXPECT_NEAR(ev::t_test(a, b, ev::Sided::kTwo).p, 2.0 * std::min(ab, 1.0 - ab), 1e-12);
    const auto r = ev::t_test(a, b, ev::Sided::kLess, true);
    EXPECT_DOUBLE_EQ(r.df, static_cast<double>(a.size() + b.size() - 2));
  }
}

TEST(TTest, WelchAgainstIntegratedOracle) {
  const std::vector<double> a{0, 0, 0, 0, 1e-9};
  const std::vector<double> b{5, 5, 5, 5, 5 + 1e-9};
  const auto r = ev::t_test(a, b, ev::Sided::kLess);
  EXPECT_LT(r.p, 1e-6);
  EXPECT_NEAR(r.df, 8.0, 1e-9);

  const std::vector<double> c{1.1, 2.3, 1.9, 2.8, 1.4, 2.2};
  const std::vector<double> d{2.0, 3.1, 2.9, 3.6};
  const auto w = ev::t_test(c, d, ev::Sided::kLess);
  // Welch statistic and degrees of freedom by hand.
  const double mc = 11.7 / 6, md = 11.6 / 4;
  double vc = 0, vd = 0;
  for (double x : c) vc += (x - mc) * (x - mc);
  for (double x : d) vd += (x - md) * (x - md);
  vc /= 5;
  vd /= 3;
  const double se2 = vc / 6 + vd / 4;
  const double df = se2 * se2 / ((vc / 6) * (vc / 6) / 5 + (vd / 4) * (vd / 4) / 3);
  EXPECT_NEAR(w.t, (mc - md) / std::sqrt(se2), 1e-12);
  EXPECT_NEAR(w.df, df, 1e-12);
  EXPECT_NEAR(w.p, t_cdf_oracle(w.t, w.df), 1e-9);
}

TEST(TTest, DegenerateInputs) {
  const std::vector<double> flat{2, 2, 2};
  EXPECT_THROW(ev::t_test(flat, flat, ev::Sided::kTwo), std::invalid_argument);
  const std::vector<double> one{1};
  EXPECT_THROW(ev::t_test(one, flat, ev::Sided::kTwo), std::invalid_argument);
}

TEST(MetricsCsv, RoundTripsExactly) {
  TempDir dir("metrics");
  std::vector<ev::MetricRecord> records{{"EU", "1", 3, "Trans", "I", 1, 0.1 + 0.2, 1.0 / 3.0},
                                        {"US", "final", 36, "Trans+GCN+Adp", "IMH", 5, 2.5e-7, 12.0}};
  ev::write_metrics_csv(records, dir / "m.csv");
  EXPECT_EQ(ev::read_metrics_csv(dir / "m.csv"), records);
}

TEST(Aggregates, GroupBySeed) {
  std::vector<ev::MetricRecord> records;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    records.push_back({"EU", "1", 3, "Trans", "I", seed, 1.0, 2.0});
    records.push_back({"EU", "1", 3, "Trans", "IB", seed, static_cast<double>(seed), 2.0});
  }
  const auto rows = ev::aggregate_records(records);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].channels, "I");
  EXPECT_EQ(rows[0].mae.std, 0.0);
  EXPECT_DOUBLE_EQ(rows[1].mae.mean, 2.0);
  EXPECT_DOUBLE_EQ(rows[1].mae.std, 1.0);
}

TEST(TTestTable, RowsAndLabels) {
  std::vector<ev::MetricRecord> records;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const double s = static_cast<double>(seed);
    records.push_back({"EU", "1", 3, "Trans", "I", seed, 2.0 + 0.1 * s, 3.0 + 0.1 * s});
    records.push_back({"EU", "1", 3, "Trans", "IB", seed, 1.0 + 0.1 * s, 3.05 + 0.1 * s});
    records.push_back({"US", "1", 3, "Trans", "I", seed, 2.0 + 0.1 * s, 3.0 + 0.1 * s});
  }
  const auto rows = ev::t_test_table(records, {{"IB", "I", ev::Sided::kLess}});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].metric, "MAE");
  EXPECT_EQ(rows[0].region_set, "EU");
  ASSERT_EQ(rows[0].cells.size(), 1u);
  EXPECT_EQ(rows[0].cells[0].label, "IB vs. I");
  ASSERT_TRUE(rows[0].cells[0].result.has_value());
  EXPECT_LT(rows[0].cells[0].result->p, 0.001);
  EXPECT_FALSE(rows[1].cells[0].result.has_value());  // US lacks IB runs

  TempDir dir("ttest");
  ev::write_t_test_csv(rows, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "metric,region_set,IB vs. I");
}
