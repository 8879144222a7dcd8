#pragma once

// Daily per-region panels: CSV ingest, gap imputation and per-capita scaling.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spatio/util/csv.hpp"

namespace spatio::data {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws std::invalid_argument on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date date);

using spatio::DataError;

enum class Channel { kIncidence, kMortality, kHospitalization, kMobility };

char channel_code(Channel channel);
Channel parse_channel(std::string_view code);
/// Channel set label in canonical I, B, M, H order (e.g. "IMH", "IB").
std::string channel_set_label(const std::vector<Channel>& channels);
std::vector<Channel> parse_channel_set(std::string_view label);
/// Mobility is a relative index and is not scaled by population.
inline bool is_per_capita(Channel channel) { return channel != Channel::kMobility; }

struct Region {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  long long population = 0;
};

class RegionTable {
 public:
  RegionTable() = default;
  explicit RegionTable(std::vector<Region> regions);

  /// Reads `region,lat,lon,population`.
  static RegionTable load_csv(const std::filesystem::path& path);

  std::size_t size() const { return regions_.size(); }
  const Region& operator[](std::size_t i) const { return regions_[i]; }
  const std::vector<Region>& regions() const { return regions_; }
  std::optional<std::size_t> find(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::vector<Region> regions_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Region-major value cube: value(r, d, c) lives at ((r * days) + d) * C + c.
struct Panel {
  std::vector<Date> dates;
  std::vector<std::string> regions;
  std::vector<Channel> channels;
  std::vector<double> values;

  std::size_t days() const { return dates.size(); }
  std::size_t num_regions() const { return regions.size(); }
  std::size_t num_channels() const { return channels.size(); }
  std::size_t offset(std::size_t r, std::size_t d, std::size_t c) const {
    return (r * days() + d) * num_channels() + c;
  }
  double value(std::size_t r, std::size_t d, std::size_t c) const { return values[offset(r, d, c)]; }
  double& value(std::size_t r, std::size_t d, std::size_t c) { return values[offset(r, d, c)]; }
  std::size_t missing_count() const;
  std::optional<std::size_t> channel_index(Channel channel) const;
};

/// Raw counts; missing cells hold kMissing.
struct RawPanel : Panel {};

/// Rates per 10,000 persons (mobility passes through); no missing cells.
struct NormalizedPanel : Panel {};

struct ChannelSource {
  Channel channel;
  std::filesystem::path path;
};

/// Reads one `date,region,value` CSV per channel and aligns every series on
/// the contiguous daily axis spanning all files. Empty or `NA` values and
/// absent dates become missing cells.
RawPanel load_panel(const std::vector<ChannelSource>& sources, const RegionTable& regions);

struct ImputationEntry {
  enum class Kind { kInterpolated, kBoundaryFill, kClampedNegative };
  std::string region;
  Channel channel;
  Date date;
  Kind kind;
  double original;
  double value;
};

const char* imputation_kind_name(ImputationEntry::Kind kind);

struct ImputationResult {
  RawPanel panel;
  std::vector<ImputationEntry> log;

  std::size_t count(ImputationEntry::Kind kind) const;
};

/// Clamps negative counts on I/M/H to zero (logged as mislabeled), linearly
/// interpolates interior gaps and fills leading/trailing gaps with the nearest
/// observation. Each series needs at least two observations.
ImputationResult impute(const RawPanel& panel);

NormalizedPanel normalize_per_capita(const RawPanel& panel, const RegionTable& regions);

/// Long-format `date,region,channel,value` serialization of a complete panel.
void write_panel_csv(const NormalizedPanel& panel, const std::filesystem::path& path);
NormalizedPanel read_panel_csv(const std::filesystem::path& path);
void write_imputation_log(const std::vector<ImputationEntry>& log, const std::filesystem::path& path);

}  // namespace spatio::data
