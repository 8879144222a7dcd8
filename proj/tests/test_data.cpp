#include <gtest/gtest.h>

#include <fstream>

#include "spatio/data/panel.hpp"
#include "spatio/data/windows.hpp"
#include "test_util.hpp"

namespace data = spatio::data;
using data::Channel;
using spatio::testing::TempDir;

namespace {

data::RegionTable two_regions(long long pop_a = 100000, long long pop_b = 10000) {
  return data::RegionTable({{"A", 50.0, 4.0, pop_a}, {"B", 51.0, 5.0, pop_b}});
}

void write_file(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

std::string series_csv(const std::vector<std::pair<std::string, std::string>>& rows_a,
                       const std::vector<std::pair<std::string, std::string>>& rows_b) {
  std::string out = "date,region,value\n";
  for (const auto& [d, v] : rows_a) out += d + ",A," + v + "\n";
  for (const auto& [d, v] : rows_b) out += d + ",B," + v + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> days(int first, int count, double base) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < count; ++i) {
    char date[16];
    std::snprintf(date, sizeof date, "2021-03-%02d", first + i);
    rows.emplace_back(date, std::to_string(base + i));
  }
  return rows;
}

data::RawPanel single_series(const std::vector<double>& values) {
  data::RawPanel p;
  for (std::size_t d = 0; d < values.size(); ++d) {
    p.dates.push_back(data::parse_date("2021-01-01") + std::chrono::days(d));
  }
  p.regions = {"A"};
  p.channels = {Channel::kIncidence};
  p.values = values;
  return p;
}

data::NormalizedPanel synthetic_panel(std::size_t n_days, std::size_t regions = 2, std::size_t channels = 2) {
  data::NormalizedPanel p;
  for (std::size_t d = 0; d < n_days; ++d) {
    p.dates.push_back(data::parse_date("2020-01-22") + std::chrono::days(d));
  }
  for (std::size_t r = 0; r < regions; ++r) p.regions.push_back("R" + std::to_string(r));
  const Channel all[] = {Channel::kIncidence, Channel::kMortality, Channel::kHospitalization};
  for (std::size_t c = 0; c < channels; ++c) p.channels.push_back(all[c]);
  p.values.resize(n_days * regions * channels);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = 0.5 * static_cast<double>(i) + 0.25;
  return p;
}

}  // namespace

TEST(Dates, RoundTrip) {
  EXPECT_EQ(data::format_date(data::parse_date("2020-02-29")), "2020-02-29");
  EXPECT_THROW(data::parse_date("2020-13-01"), std::invalid_argument);
  EXPECT_THROW(data::parse_date("20200101"), std::invalid_argument);
  EXPECT_EQ((data::parse_date("2022-11-27") - data::parse_date("2020-01-22")).count() + 1, 1041);
}

TEST(Channels, LabelsAreCanonical) {
  EXPECT_EQ(data::channel_set_label({Channel::kHospitalization, Channel::kIncidence, Channel::kMortality}),
            "IMH");
  EXPECT_EQ(data::channel_set_label(data::parse_channel_set("IB")), "IB");
  EXPECT_THROW(data::parse_channel_set("MH"), std::invalid_argument);
  EXPECT_THROW(data::parse_channel_set("IX"), std::invalid_argument);
}

TEST(RegionTable, ValidatesEntries) {
  EXPECT_THROW(data::RegionTable({{"A", 0, 0, 10}, {"A", 1, 1, 10}}), data::DataError);
  EXPECT_THROW(data::RegionTable({{"A", 91, 0, 10}}), data::DataError);
  EXPECT_THROW(data::RegionTable({{"A", 0, 181, 10}}), data::DataError);
  EXPECT_THROW(data::RegionTable({{"A", 0, 0, 0}}), data::DataError);
  EXPECT_EQ(two_regions().find("B"), std::optional<std::size_t>(1));
}

TEST(RegionTable, LoadsCsvAndReportsPath) {
  TempDir dir("regions");
  write_file(dir / "regions.csv", "region,lat,lon,population\nA,50,4,1000\nB,51.5,-0.1,2000\n");
  const auto table = data::RegionTable::load_csv(dir / "regions.csv");
  ASSERT_EQ(table.size(), 2u);
  EXPECT_DOUBLE_EQ(table[1].longitude, -0.1);
  try {
    data::RegionTable::load_csv(dir / "absent.csv");
    FAIL();
  } catch (const data::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("absent.csv"), std::string::npos);
  }
}

TEST(LoadPanel, CompletePanelHasNoMissingCells) {
  TempDir dir("load");
  write_file(dir / "i.csv", series_csv(days(1, 10, 1), days(1, 10, 5)));
  const auto panel = data::load_panel({{Channel::kIncidence, dir / "i.csv"}}, two_regions());
  EXPECT_EQ(panel.days(), 10u);
  EXPECT_EQ(panel.num_regions(), 2u);
  EXPECT_EQ(panel.missing_count(), 0u);
  EXPECT_DOUBLE_EQ(panel.value(1, 9, 0), 14.0);
}

TEST(LoadPanel, UnknownRegionIsRejected) {
  TempDir dir("unknown");
  write_file(dir / "i.csv", "date,region,value\n2021-03-01,A,1\n2021-03-01,Z,2\n");
  EXPECT_THROW(data::load_panel({{Channel::kIncidence, dir / "i.csv"}}, two_regions()), data::DataError);
}

TEST(LoadPanel, DuplicateAndNonMonotoneRowsAreRejected) {
  TempDir dir("dup");
  write_file(dir / "dup.csv", "date,region,value\n2021-03-01,A,1\n2021-03-01,A,2\n");
  EXPECT_THROW(data::load_panel({{Channel::kIncidence, dir / "dup.csv"}}, two_regions()), data::DataError);
  write_file(dir / "order.csv", "date,region,value\n2021-03-02,A,1\n2021-03-01,A,2\n");
  EXPECT_THROW(data::load_panel({{Channel::kIncidence, dir / "order.csv"}}, two_regions()), data::DataError);
}

TEST(LoadPanel, AbsentDateBecomesOneMissingCell) {
  TempDir dir("gap");
  auto a = days(1, 10, 1);
  a.erase(a.begin() + 4);
  write_file(dir / "i.csv", series_csv(a, days(1, 10, 5)));
  const auto panel = data::load_panel({{Channel::kIncidence, dir / "i.csv"}}, two_regions());
  EXPECT_EQ(panel.missing_count(), 1u);
  EXPECT_TRUE(data::is_missing(panel.value(0, 4, 0)));
}

TEST(LoadPanel, NaAndEmptyValuesAreMissing) {
  TempDir dir("na");
  write_file(dir / "i.csv", "date,region,value\n2021-03-01,A,NA\n2021-03-02,A,\n2021-03-03,A,4\n");
  const auto panel = data::load_panel({{Channel::kIncidence, dir / "i.csv"}}, two_regions());
  // Region B has no rows at all; every one of its cells is missing too.
  EXPECT_EQ(panel.missing_count(), 2u + 3u);
}

TEST(Impute, InterpolatesInteriorGap) {
  const auto result = data::impute(single_series({1, data::kMissing, 3}));
  EXPECT_EQ(result.panel.values, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(result.count(data::ImputationEntry::Kind::kInterpolated), 1u);
}

TEST(Impute, FillsBoundaryFromNearest) {
  const auto result = data::impute(single_series({data::kMissing, 5, 5}));
  EXPECT_EQ(result.panel.values, (std::vector<double>{5, 5, 5}));
  EXPECT_EQ(result.count(data::ImputationEntry::Kind::kBoundaryFill), 1u);
  const auto tail = data::impute(single_series({2, 4, data::kMissing, data::kMissing}));
  EXPECT_EQ(tail.panel.values, (std::vector<double>{2, 4, 4, 4}));
}

TEST(Impute, ClampsNegativeCountsAndLogsThem) {
  const auto result = data::impute(single_series({2, -1, 4}));
  EXPECT_EQ(result.panel.values, (std::vector<double>{2, 0, 4}));
  ASSERT_EQ(result.log.size(), 1u);
  EXPECT_EQ(result.log[0].kind, data::ImputationEntry::Kind::kClampedNegative);
  EXPECT_DOUBLE_EQ(result.log[0].original, -1.0);
}

TEST(Impute, NeedsTwoObservations) {
  EXPECT_THROW(data::impute(single_series({data::kMissing, 3, data::kMissing})), data::DataError);
}

TEST(Normalize, RatePerTenThousand) {
  data::RawPanel raw;
  raw.dates = {data::parse_date("2021-01-01")};
  raw.regions = {"A", "B"};
  raw.channels = {Channel::kIncidence, Channel::kMobility};
  raw.values = {50, -12, 7, 30};
  const auto norm = data::normalize_per_capita(raw, two_regions(100000, 10000));
  EXPECT_DOUBLE_EQ(norm.value(0, 0, 0), 5.0);
  EXPECT_DOUBLE_EQ(norm.value(0, 0, 1), -12.0);  // mobility passes through
  EXPECT_DOUBLE_EQ(norm.value(1, 0, 0), 7.0);
  raw.values = {0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(data::normalize_per_capita(raw, two_regions()).value(0, 0, 0), 0.0);
}

TEST(PanelCsv, RoundTripsExactly) {
  TempDir dir("panel");
  const auto panel = synthetic_panel(9, 3, 2);
  data::write_panel_csv(panel, dir / "panel.csv");
  const auto back = data::read_panel_csv(dir / "panel.csv");
  EXPECT_EQ(back.values, panel.values);
  EXPECT_EQ(back.dates, panel.dates);
  EXPECT_EQ(back.regions, panel.regions);
  EXPECT_EQ(back.channels, panel.channels);
}

TEST(Windows, CountsAndTimesteps) {
  EXPECT_EQ(data::forecast_timesteps(102, 3), 104u);
  EXPECT_EQ(data::forecast_timesteps(101, 12), 112u);
  EXPECT_EQ(data::window_count(15, 12, 3), 1u);
  EXPECT_EQ(data::window_count(14, 12, 3), 0u);
  EXPECT_EQ(data::make_windows(synthetic_panel(15), 12, 3).size(), 1u);
  EXPECT_THROW(data::make_windows(synthetic_panel(14), 12, 3), data::DataError);
}

TEST(Windows, TargetFollowsInput) {
  const auto panel = synthetic_panel(30, 2, 2);
  const auto samples = data::make_windows(panel, 5, 3);
  ASSERT_EQ(samples.size(), 30u - 5 - 3 + 1);
  const auto& s = samples[4];
  EXPECT_EQ(s.start_date, panel.dates[4]);
  EXPECT_EQ(s.x.shape(), (spatio::numcore::Shape{2, 5, 2}));
  EXPECT_EQ(s.y.shape(), (spatio::numcore::Shape{2, 3, 2}));
  EXPECT_DOUBLE_EQ(s.x.at(1, 4, 1), panel.value(1, 8, 1));
  EXPECT_DOUBLE_EQ(s.y.at(1, 0, 1), panel.value(1, 9, 1));
}

TEST(Windows, ReassemblyReproducesPanel) {
  const auto panel = synthetic_panel(40, 3, 2);
  const auto samples = data::make_windows(panel, 12, 6);
  EXPECT_EQ(data::reassemble(samples), panel.values);
}

TEST(Folds, SpecExampleWithTwentyPercentTail) {
  data::FoldPolicy policy;
  policy.final_numerator = 1;
  policy.final_denominator = 5;
  const auto folds = data::progressive_folds(100, policy);
  ASSERT_EQ(folds.size(), 6u);
  const auto& final = folds.back();
  EXPECT_TRUE(final.is_final());
  EXPECT_EQ(final.test, (data::IndexRange{80, 100}));  // samples 81-100
  const auto& f5 = folds[4];
  EXPECT_EQ(f5.fold, 5);
  EXPECT_EQ(f5.test, (data::IndexRange{64, 80}));  // samples 65-80
  const auto& f1 = folds[0];
  EXPECT_EQ(f1.train, (data::IndexRange{0, 11}));  // 1-11
  EXPECT_EQ(f1.val, (data::IndexRange{11, 13}));   // 12-13
  EXPECT_EQ(f1.test, (data::IndexRange{13, 16}));  // 14-16
}

TEST(Folds, DefaultTailIsOneTenth) {
  const auto folds = data::progressive_folds(1030);
  EXPECT_EQ(folds.back().test.size(), 103u);
  EXPECT_EQ(folds.back().test.end, 1030u);
}

TEST(Folds, OrderingAndNoLeakage) {
  for (std::size_t n = 50; n <= 1200; n += 7) {
    const auto folds = data::progressive_folds(n);
    const auto& final = folds.back();
    for (const auto& f : folds) {
      EXPECT_FALSE(f.train.empty()) << n << " fold " << f.label();
      EXPECT_FALSE(f.val.empty()) << n << " fold " << f.label();
      EXPECT_FALSE(f.test.empty()) << n << " fold " << f.label();
      EXPECT_EQ(f.train.begin, 0u);
      EXPECT_EQ(f.train.end, f.val.begin);
      EXPECT_EQ(f.val.end, f.test.begin);
      EXPECT_GE(f.train.size(), f.test.size());
      if (!f.is_final() && f.fold <= 4) {
        EXPECT_LT(f.test.end, final.test.begin);
      }
      if (!f.is_final()) {
        EXPECT_LE(f.test.end, final.test.begin);
      }
    }
    for (std::size_t k = 1; k + 1 < folds.size() - 1; ++k) {
      EXPECT_GT(folds[k].test.begin, folds[k - 1].test.begin);
    }
  }
}

TEST(Folds, TooFewSamplesIsAnError) {
  EXPECT_THROW(data::progressive_folds(49), data::DataError);
}
