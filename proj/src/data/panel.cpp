#include "spatio/data/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>


namespace spatio::data {

using namespace std::chrono;

Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto field = [&](std::size_t pos, std::size_t len, auto& out) {
    if (pos + len > text.size()) return false;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && ptr == text.data() + pos + len;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !field(0, 4, y) ||
      !field(5, 2, m) || !field(8, 2, d)) {
    throw std::invalid_argument("malformed ISO date '" + std::string(text) + "'");
  }
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
  return sys_days{ymd};
}

std::string format_date(Date date) {
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

char channel_code(Channel channel) {
  switch (channel) {
    case Channel::kIncidence: return 'I';
    case Channel::kMortality: return 'M';
    case Channel::kHospitalization: return 'H';
    case Channel::kMobility: return 'B';
  }
  return '?';
}

Channel parse_channel(std::string_view code) {
  if (code == "I") return Channel::kIncidence;
  if (code == "M") return Channel::kMortality;
  if (code == "H") return Channel::kHospitalization;
  if (code == "B") return Channel::kMobility;
  throw std::invalid_argument("unknown channel '" + std::string(code) + "' (expected I, M, H or B)");
}

namespace {
int canonical_rank(Channel c) {
  switch (c) {
    case Channel::kIncidence: return 0;
    case Channel::kMobility: return 1;
    case Channel::kMortality: return 2;
    case Channel::kHospitalization: return 3;
  }
  return 4;
}
}  // namespace

std::string channel_set_label(const std::vector<Channel>& channels) {
  std::vector<Channel> sorted = channels;
  std::sort(sorted.begin(), sorted.end(),
            [](Channel a, Channel b) { return canonical_rank(a) < canonical_rank(b); });
  std::string label;
  for (auto c : sorted) label += channel_code(c);
  return label;
}

std::vector<Channel> parse_channel_set(std::string_view label) {
  std::vector<Channel> out;
  for (char ch : label) {
    const Channel c = parse_channel(std::string_view(&ch, 1));
    if (std::find(out.begin(), out.end(), c) != out.end()) {
      throw std::invalid_argument("duplicate channel in '" + std::string(label) + "'");
    }
    out.push_back(c);
  }
  if (out.empty() || out.front() != Channel::kIncidence) {
    throw std::invalid_argument("channel set '" + std::string(label) + "' must start with I");
  }
  return out;
}

RegionTable::RegionTable(std::vector<Region> regions) : regions_(std::move(regions)) {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& r = regions_[i];
    if (!index_.emplace(r.id, i).second) throw DataError("duplicate region id '" + r.id + "'");
    if (std::fabs(r.latitude) > 90.0 || std::fabs(r.longitude) > 180.0) {
      throw DataError("region '" + r.id + "' has out-of-range coordinates");
    }
    if (r.population <= 0) throw DataError("region '" + r.id + "' needs a positive population");
  }
}

RegionTable RegionTable::load_csv(const std::filesystem::path& path) {
  util::CsvReader reader(path);
  reader.expect_header({"region", "lat", "lon", "population"});
  std::vector<Region> regions;
  while (auto row = reader.next()) {
    if (row->size() != 4) reader.fail("expected 4 fields");
    Region r;
    r.id = (*row)[0];
    r.latitude = reader.parse_double((*row)[1]);
    r.longitude = reader.parse_double((*row)[2]);
    r.population = static_cast<long long>(reader.parse_double((*row)[3]));
    regions.push_back(std::move(r));
  }
  try {
    return RegionTable(std::move(regions));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::optional<std::size_t> RegionTable::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> RegionTable::ids() const {
  std::vector<std::string> out;
  for (const auto& r : regions_) out.push_back(r.id);
  return out;
}

std::size_t Panel::missing_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), is_missing));
}

std::optional<std::size_t> Panel::channel_index(Channel channel) const {
  auto it = std::find(channels.begin(), channels.end(), channel);
  if (it == channels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - channels.begin());
}

RawPanel load_panel(const std::vector<ChannelSource>& sources, const RegionTable& regions) {
  if (sources.empty()) throw DataError("no channel sources given");
  bool has_incidence = false;
  for (const auto& s : sources) has_incidence = has_incidence || s.channel == Channel::kIncidence;
  if (!has_incidence) throw DataError("channel set must include incidence (I)");

  struct Cell {
    std::size_t region;
    Date date;
    double value;
  };
  std::vector<std::vector<Cell>> per_source(sources.size());
  std::optional<Date> first;
  std::optional<Date> last;

  for (std::size_t s = 0; s < sources.size(); ++s) {
    util::CsvReader reader(sources[s].path);
    reader.expect_header({"date", "region", "value"});
    std::map<std::size_t, Date> last_seen;
    while (auto row = reader.next()) {
      if (row->size() != 3) reader.fail("expected 3 fields");
      Date date;
      try {
        date = parse_date((*row)[0]);
      } catch (const std::invalid_argument& e) {
        reader.fail(e.what());
      }
      const auto region = regions.find((*row)[1]);
      if (!region) reader.fail("unknown region '" + (*row)[1] + "'");
      auto seen = last_seen.find(*region);
      if (seen != last_seen.end()) {
        if (seen->second == date) reader.fail("duplicate row for (" + (*row)[0] + ", " + (*row)[1] + ")");
        if (seen->second > date) reader.fail("non-monotone dates for region '" + (*row)[1] + "'");
      }
      last_seen[*region] = date;
      const std::string& text = (*row)[2];
      const double value = (text.empty() || text == "NA") ? kMissing : reader.parse_double(text);
      per_source[s].push_back({*region, date, value});
      if (!first || date < *first) first = date;
      if (!last || date > *last) last = date;
    }
  }
  if (!first) throw DataError("channel sources contain no rows");

  RawPanel panel;
  for (Date d = *first; d <= *last; d += days{1}) panel.dates.push_back(d);
  panel.regions = regions.ids();
  for (const auto& s : sources) panel.channels.push_back(s.channel);
  panel.values.assign(panel.num_regions() * panel.days() * panel.num_channels(), kMissing);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (const auto& cell : per_source[s]) {
      const auto d = static_cast<std::size_t>((cell.date - *first).count());
      panel.value(cell.region, d, s) = cell.value;
    }
  }
  return panel;
}

const char* imputation_kind_name(ImputationEntry::Kind kind) {
  switch (kind) {
    case ImputationEntry::Kind::kInterpolated: return "interpolated";
    case ImputationEntry::Kind::kBoundaryFill: return "boundary_fill";
    case ImputationEntry::Kind::kClampedNegative: return "clamped_negative";
  }
  return "unknown";
}

std::size_t ImputationResult::count(ImputationEntry::Kind kind) const {
  return static_cast<std::size_t>(
      std::count_if(log.begin(), log.end(), [kind](const auto& e) { return e.kind == kind; }));
}

ImputationResult impute(const RawPanel& panel) {
  ImputationResult result{panel, {}};
  RawPanel& out = result.panel;
  const std::size_t days = out.days();
  for (std::size_t r = 0; r < out.num_regions(); ++r) {
    for (std::size_t c = 0; c < out.num_channels(); ++c) {
      const Channel channel = out.channels[c];
      std::vector<std::size_t> observed;
      for (std::size_t d = 0; d < days; ++d) {
        double& v = out.value(r, d, c);
        if (is_missing(v)) continue;
        if (v < 0.0 && is_per_capita(channel)) {
          result.log.push_back({out.regions[r], channel, out.dates[d],
                                ImputationEntry::Kind::kClampedNegative, v, 0.0});
          v = 0.0;
        }
        observed.push_back(d);
      }
      if (observed.size() < 2) {
        throw DataError("series " + out.regions[r] + "/" + std::string(1, channel_code(channel)) +
                        " has fewer than 2 observations");
      }
      auto fill = [&](std::size_t d, double value, ImputationEntry::Kind kind) {
        out.value(r, d, c) = value;
        result.log.push_back({out.regions[r], channel, out.dates[d], kind, kMissing, value});
      };
      for (std::size_t d = 0; d < observed.front(); ++d)
        fill(d, out.value(r, observed.front(), c), ImputationEntry::Kind::kBoundaryFill);
      for (std::size_t k = 0; k + 1 < observed.size(); ++k) {
        const std::size_t lo = observed[k];
        const std::size_t hi = observed[k + 1];
        const double vlo = out.value(r, lo, c);
        const double vhi = out.value(r, hi, c);
        for (std::size_t d = lo + 1; d < hi; ++d) {
          const double t = static_cast<double>(d - lo) / static_cast<double>(hi - lo);
          fill(d, vlo + t * (vhi - vlo), ImputationEntry::Kind::kInterpolated);
        }
      }
      for (std::size_t d = observed.back() + 1; d < days; ++d)
        fill(d, out.value(r, observed.back(), c), ImputationEntry::Kind::kBoundaryFill);
    }
  }
  return result;
}

NormalizedPanel normalize_per_capita(const RawPanel& panel, const RegionTable& regions) {
  NormalizedPanel out;
  static_cast<Panel&>(out) = panel;
  for (std::size_t r = 0; r < out.num_regions(); ++r) {
    const auto idx = regions.find(out.regions[r]);
    if (!idx) throw DataError("region '" + out.regions[r] + "' missing from region table");
    const double population = static_cast<double>(regions[*idx].population);
    for (std::size_t c = 0; c < out.num_channels(); ++c) {
      if (!is_per_capita(out.channels[c])) continue;
      for (std::size_t d = 0; d < out.days(); ++d) out.value(r, d, c) = out.value(r, d, c) / population * 10000.0;
    }
  }
  return out;
}

void write_panel_csv(const NormalizedPanel& panel, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "date,region,channel,value\n";
  char buf[64];
  for (std::size_t d = 0; d < panel.days(); ++d) {
    const std::string date = format_date(panel.dates[d]);
    for (std::size_t r = 0; r < panel.num_regions(); ++r) {
      for (std::size_t c = 0; c < panel.num_channels(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", panel.value(r, d, c));
        os << date << ',' << panel.regions[r] << ',' << channel_code(panel.channels[c]) << ','
           << buf << '\n';
      }
    }
  }
}

NormalizedPanel read_panel_csv(const std::filesystem::path& path) {
  util::CsvReader reader(path);
  reader.expect_header({"date", "region", "channel", "value"});
  struct Row {
    Date date;
    std::string region;
    Channel channel;
    double value;
  };
  std::vector<Row> rows;
  std::vector<std::string> region_order;
  std::vector<Channel> channel_order;
  std::set<Date> dates;
  while (auto row = reader.next()) {
    if (row->size() != 4) reader.fail("expected 4 fields");
    Row r{parse_date((*row)[0]), (*row)[1], parse_channel((*row)[2]), reader.parse_double((*row)[3])};
    if (std::find(region_order.begin(), region_order.end(), r.region) == region_order.end())
      region_order.push_back(r.region);
    if (std::find(channel_order.begin(), channel_order.end(), r.channel) == channel_order.end())
      channel_order.push_back(r.channel);
    dates.insert(r.date);
    rows.push_back(std::move(r));
  }
  NormalizedPanel panel;
  panel.dates.assign(dates.begin(), dates.end());
  panel.regions = region_order;
  panel.channels = channel_order;
  panel.values.assign(panel.num_regions() * panel.days() * panel.num_channels(), kMissing);
  for (const auto& r : rows) {
    const auto ri = static_cast<std::size_t>(
        std::find(region_order.begin(), region_order.end(), r.region) - region_order.begin());
    const auto ci = *panel.channel_index(r.channel);
    const auto di = static_cast<std::size_t>(
        std::lower_bound(panel.dates.begin(), panel.dates.end(), r.date) - panel.dates.begin());
    panel.value(ri, di, ci) = r.value;
  }
  if (panel.missing_count() != 0) throw DataError(path.string() + ": panel file has missing cells");
  return panel;
}

void write_imputation_log(const std::vector<ImputationEntry>& log, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "date,region,channel,kind,original,value\n";
  char orig[64];
  char val[64];
  for (const auto& e : log) {
    if (is_missing(e.original)) {
      std::snprintf(orig, sizeof orig, "NA");
    } else {
      std::snprintf(orig, sizeof orig, "%.17g", e.original);
    }
    std::snprintf(val, sizeof val, "%.17g", e.value);
    os << format_date(e.date) << ',' << e.region << ',' << channel_code(e.channel) << ','
       << imputation_kind_name(e.kind) << ',' << orig << ',' << val << '\n';
  }
}

}  // namespace spatio::data
