#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <regex>

#include "spatio/analysis/analysis.hpp"
#include "spatio/graph/adjacency.hpp"
#include "test_util.hpp"

namespace an = spatio::analysis;
using spatio::data::Date;
using spatio::data::parse_date;
using spatio::numcore::Tensor;
using spatio::testing::TempDir;

namespace {

Tensor eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

Tensor random_sparse(std::size_t n, std::mt19937_64& rng, double keep) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * n);
  for (auto& x : v) x = u(rng) < keep ? u(rng) : 0.0;
  return Tensor({n, n}, std::move(v));
}

std::size_t count_matches(const std::string& text, const std::string& pattern) {
  const std::regex re(pattern);
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

}  // namespace

TEST(Votes, IdentityContributesNothing) {
  const auto r = an::connectivity_votes({eye(4), eye(4)});
  EXPECT_EQ(r.counted, 0u);
  EXPECT_EQ(r.skipped, 2u);
  for (const auto& v : r.votes) EXPECT_EQ(v, an::VoteCount{});
}

TEST(Votes, StarGraph) {
  std::vector<double> v(16, 0.0);
  for (std::size_t leaf = 1; leaf < 4; ++leaf) v[leaf] = v[leaf * 4] = 0.5;
  const auto r = an::connectivity_votes({Tensor({4, 4}, v)});
  EXPECT_EQ(r.votes[0], (an::VoteCount{0, 1}));
  for (std::size_t leaf = 1; leaf < 4; ++leaf) EXPECT_EQ(r.votes[leaf], (an::VoteCount{1, 0}));
}

TEST(Votes, MatchesBruteForceRecount) {
  std::mt19937_64 rng(11);
  std::vector<Tensor> batch;
  for (int i = 0; i < 50; ++i) batch.push_back(random_sparse(4, rng, 0.4));
  batch.push_back(eye(4));
  for (auto mode : {an::Connectivity::kRowAndColumn, an::Connectivity::kRowOnly}) {
    std::vector<an::VoteCount> expected(4);
    std::size_t counted = 0;
    for (const auto& a : batch) {
      bool any_edge = false;
      std::vector<int> deg(4, 0);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          if (i == j || a.at(i, j) == 0.0) continue;
          any_edge = true;
          deg[i] += 1;
          if (mode == an::Connectivity::kRowAndColumn) deg[j] += 1;
        }
      }
      if (!any_edge) continue;
      ++counted;
      int lo = deg[0], hi = deg[0];
      for (int d : deg) lo = std::min(lo, d), hi = std::max(hi, d);
      for (std::size_t i = 0; i < 4; ++i) {
        if (deg[i] == lo) ++expected[i].min_votes;
        if (deg[i] == hi) ++expected[i].max_votes;
      }
    }
    const auto r = an::connectivity_votes(batch, mode);
    EXPECT_EQ(r.votes, expected);
    EXPECT_EQ(r.counted, counted);
  }
}

TEST(Votes, EveryCountedMatrixCastsBothVotes) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_sparse(5, rng, 0.3);
    const auto r = an::connectivity_votes({a});
    if (r.counted == 0) continue;
    std::size_t mins = 0, maxs = 0;
    for (const auto& v : r.votes) mins += v.min_votes, maxs += v.max_votes;
    EXPECT_GE(mins, 1u);
    EXPECT_GE(maxs, 1u);
  }
}

TEST(Votes, RejectsMixedSizes) {
  EXPECT_THROW(an::connectivity_votes({eye(3), eye(4)}), std::invalid_argument);
  EXPECT_THROW(an::connectivity_votes({Tensor({2, 3}, std::vector<double>(6, 0.0))}), std::invalid_argument);
}

TEST(AvgWeight, ClosedForms) {
  EXPECT_DOUBLE_EQ(an::avg_nonzero_weight({eye(5)}), 1.0);
  EXPECT_DOUBLE_EQ(an::avg_nonzero_weight({Tensor({2, 2}, {0.2, 0.0, 0.0, 0.4})}), 0.3);
  EXPECT_THROW(an::avg_nonzero_weight({Tensor({2, 2}, {0.0, 0.0, 0.0, 0.0})}), std::invalid_argument);
}

TEST(AvgWeight, MatchesFilterMeanAndScales) {
  std::mt19937_64 rng(13);
  std::vector<Tensor> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(random_sparse(6, rng, 0.5));
  double sum = 0.0;
  int count = 0;
  for (const auto& a : batch) {
    for (std::size_t i = 0; i < 36; ++i) {
      if (a[i] > 0.0) sum += a[i], ++count;
    }
  }
  EXPECT_NEAR(an::avg_nonzero_weight(batch), sum / count, 1e-14);
  std::vector<Tensor> scaled;
  for (const auto& a : batch) {
    auto v = a.to_vector();
    for (auto& x : v) x *= 3.5;
    scaled.emplace_back(a.shape(), std::move(v));
  }
  EXPECT_NEAR(an::avg_nonzero_weight(scaled), 3.5 * sum / count, 1e-13);
}

TEST(Indicators, AveragesBlocksPerDate) {
  const Date d = parse_date("2020-04-01");
  const auto r = an::indicators_by_date({{d + std::chrono::days(1), eye(2)},
                                         {d, eye(2)},
                                         {d, Tensor({2, 2}, {1, 1, 1, 1})}});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].sample_start, d);
  EXPECT_DOUBLE_EQ(r[0].pi, 0.75);
  EXPECT_DOUBLE_EQ(r[1].pi, 0.5);
}

class LockdownTable : public ::testing::Test {
 protected:
  // Pi(day k) = (10 + k) / 100 for days k = 0..99 from the origin.
  void SetUp() override {
    for (int k = 0; k < 100; ++k) indicators_.push_back({origin_ + std::chrono::days(k), (10.0 + k) / 100.0});
  }
  static double pi(int k) { return (10.0 + k) / 100.0; }
  // Mean of pi over days a..b inclusive: arithmetic series midpoint.
  static double mean_pi(int a, int b) { return (pi(a) + pi(b)) / 2.0; }

  Date origin_ = parse_date("2020-02-01");
  std::vector<an::DatedIndicator> indicators_;
};

TEST_F(LockdownTable, LinearRampMatchesClosedForm) {
  const an::LockdownWindow w{"LU", origin_ + std::chrono::days(40), origin_ + std::chrono::days(55), std::nullopt};
  const auto rows = an::lockdown_indicator_table(indicators_, {w});
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  EXPECT_FALSE(r.partial);
  EXPECT_EQ(r.during_samples, 16u);
  EXPECT_NEAR(*r.during, mean_pi(40, 55), 1e-14);
  EXPECT_EQ(r.pre_samples, 24u);
  EXPECT_NEAR(*r.pre_average, mean_pi(16, 39), 1e-14);
  EXPECT_NEAR(*r.pre_first, pi(16), 1e-15);
  EXPECT_EQ(r.post_samples, 24u);
  EXPECT_NEAR(*r.post_average, mean_pi(56, 79), 1e-14);
  EXPECT_NEAR(*r.post_last, pi(79), 1e-15);
}

TEST_F(LockdownTable, PerRegionPostOverrideAndPartialFlag) {
  const an::LockdownWindow lu{"LU", origin_ + std::chrono::days(30), origin_ + std::chrono::days(40), 40};
  const an::LockdownWindow late{"IT", origin_ + std::chrono::days(90), origin_ + std::chrono::days(95), std::nullopt};
  const auto rows = an::lockdown_indicator_table(indicators_, {lu, late});
  EXPECT_EQ(rows[0].post_samples, 40u);
  EXPECT_NEAR(*rows[0].post_last, pi(80), 1e-15);
  EXPECT_FALSE(rows[0].partial);
  EXPECT_TRUE(rows[1].partial);
  EXPECT_EQ(rows[1].post_samples, 4u);  // days 96..99 exist
}

TEST_F(LockdownTable, SingleSampleWindowAndConstantField) {
  const Date day = origin_ + std::chrono::days(50);
  const auto rows = an::lockdown_indicator_table(indicators_, {{"X", day, day, std::nullopt}});
  EXPECT_DOUBLE_EQ(*rows[0].during, pi(50));

  std::vector<an::DatedIndicator> flat;
  for (int k = 0; k < 100; ++k) flat.push_back({origin_ + std::chrono::days(k), 0.25});
  const auto c = an::lockdown_indicator_table(flat, {{"X", day, day + std::chrono::days(5), std::nullopt}})[0];
  EXPECT_DOUBLE_EQ(*c.during, 0.25);
  EXPECT_DOUBLE_EQ(*c.pre_average, 0.25);
  EXPECT_DOUBLE_EQ(*c.post_average, 0.25);
}

TEST_F(LockdownTable, ValuesStayWithinWindowRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<an::DatedIndicator> noisy;
  for (int k = 0; k < 100; ++k) noisy.push_back({origin_ + std::chrono::days(k), u(rng)});
  const auto r = an::lockdown_indicator_table(noisy, {{"X", origin_ + std::chrono::days(30),
                                                       origin_ + std::chrono::days(45), std::nullopt}})[0];
  double lo = 1.0, hi = 0.0;
  for (int k = 30; k <= 45; ++k) lo = std::min(lo, noisy[k].pi), hi = std::max(hi, noisy[k].pi);
  EXPECT_GE(*r.during, lo);
  EXPECT_LE(*r.during, hi);
}

TEST_F(LockdownTable, CsvAndWindowFile) {
  TempDir dir("lockdown");
  {
    std::ofstream out(dir / "windows.csv");
    out << "region,start,end,post_days\nLU,2020-03-10,2020-03-20,40\nDE,2020-03-15,2020-03-25,\n";
  }
  const auto windows = an::read_lockdown_windows(dir / "windows.csv");
  ASSERT_EQ(windows.size(), 2u);
  EXPECT_EQ(windows[0].post_days, 40u);
  EXPECT_FALSE(windows[1].post_days.has_value());
  an::write_indicator_csv(an::lockdown_indicator_table(indicators_, windows), dir / "table.csv");
  std::ifstream in(dir / "table.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header.substr(0, 64), "region,window,during,pre_average,pre_first,post_average,post_las");
  EXPECT_EQ(first.substr(0, 25), "LU,2020-03-10/2020-03-20,");

  {
    std::ofstream out(dir / "bad.csv");
    out << "region,start,end\nLU,2020-03-20,2020-03-10\n";
  }
  EXPECT_THROW(an::read_lockdown_windows(dir / "bad.csv"), spatio::DataError);
}

TEST(Heatmap, RampEnds) {
  EXPECT_EQ(an::ramp_color(0.0), "#2166ac");
  EXPECT_EQ(an::ramp_color(1.0), "#b2182b");
  EXPECT_EQ(an::ramp_color(0.5), "#f7f7f7");
}

TEST(Heatmap, ZeroIdentityAndStructure) {
  const std::string zero = an::heatmap_svg(Tensor({2, 2}, {0, 0, 0, 0}), {"A", "B"});
  EXPECT_EQ(count_matches(zero, "<rect class=\"cell\""), 4u);
  EXPECT_EQ(count_matches(zero, "<text class=\"label\""), 4u);
  EXPECT_EQ(count_matches(zero, "fill=\"#2166ac\""), 4u);

  const std::string id = an::heatmap_svg(eye(3), {"A", "B", "C"});
  EXPECT_EQ(count_matches(id, "fill=\"#b2182b\""), 3u);
  EXPECT_EQ(count_matches(id, "fill=\"#2166ac\""), 6u);
  EXPECT_THROW(an::heatmap_svg(eye(3), {"A"}), std::invalid_argument);
}

TEST(Heatmap, DeterministicBytes) {
  std::mt19937_64 rng(7);
  const auto a = random_sparse(4, rng, 0.6);
  TempDir dir("heatmap");
  an::write_heatmap(a, {"a", "b", "c", "d<e"}, dir / "1.svg");
  an::write_heatmap(a, {"a", "b", "c", "d<e"}, dir / "2.svg");
  std::ifstream f1(dir / "1.svg"), f2(dir / "2.svg");
  const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
  EXPECT_EQ(s1, s2);
  EXPECT_NE(s1.find("d&lt;e"), std::string::npos);
}
