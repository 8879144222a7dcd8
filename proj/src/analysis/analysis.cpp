#include "spatio/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "spatio/graph/adjacency.hpp"
#include "spatio/util/csv.hpp"

namespace spatio::analysis {

namespace {

std::size_t square_size(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw std::invalid_argument("expected a square matrix, got " + numcore::shape_string(a.shape()));
  }
  return a.dim(0);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::size_t> connectivity(const Tensor& a, Connectivity mode) {
  const std::size_t n = square_size(a);
  std::vector<std::size_t> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || a.at(i, j) == 0.0) continue;
      ++deg[i];
      if (mode == Connectivity::kRowAndColumn) ++deg[j];
    }
  }
  return deg;
}

bool is_identity_map(const Tensor& a) {
  const std::size_t n = square_size(a);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && a.at(i, j) != 0.0) return false;
    }
  }
  return true;
}

VoteResult connectivity_votes(const std::vector<Tensor>& snapshots, Connectivity mode) {
  VoteResult result;
  if (snapshots.empty()) return result;
  const std::size_t n = square_size(snapshots.front());
  result.votes.assign(n, {});
  for (const auto& a : snapshots) {
    if (square_size(a) != n) {
      throw std::invalid_argument("snapshots mix sizes " + std::to_string(n) + " and " + std::to_string(a.dim(0)));
    }
    if (is_identity_map(a)) {
      ++result.skipped;
      continue;
    }
    const auto deg = connectivity(a, mode);
    const auto [lo, hi] = std::minmax_element(deg.begin(), deg.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (deg[i] == *lo) ++result.votes[i].min_votes;
      if (deg[i] == *hi) ++result.votes[i].max_votes;
    }
    ++result.counted;
  }
  return result;
}

double avg_nonzero_weight(const std::vector<Tensor>& snapshots) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& a : snapshots) {
    for (double v : a.values()) {
      if (v > 0.0) {
        sum += v;
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("no positive weights in the snapshots");
  return sum / static_cast<double>(count);
}

std::vector<LockdownWindow> read_lockdown_windows(const std::filesystem::path& path) {
  util::CsvReader reader(path);
  auto header = reader.next();
  if (!header || header->size() < 3 || (*header)[0] != "region" || (*header)[1] != "start" ||
      (*header)[2] != "end") {
    reader.fail("expected header region,start,end[,post_days]");
  }
  std::vector<LockdownWindow> out;
  while (auto row = reader.next()) {
    if (row->size() < 3 || row->size() > 4) reader.fail("expected 3 or 4 fields");
    LockdownWindow w;
    w.region_id = (*row)[0];
    try {
      w.start = data::parse_date((*row)[1]);
      w.end = data::parse_date((*row)[2]);
    } catch (const std::invalid_argument& e) {
      reader.fail(e.what());
    }
    if (w.end < w.start) reader.fail("lockdown ends before it starts");
    if (row->size() == 4 && !(*row)[3].empty()) {
      w.post_days = static_cast<std::size_t>(reader.parse_double((*row)[3]));
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<DatedIndicator> indicators_by_date(const std::vector<std::pair<Date, Tensor>>& snapshots) {
  std::map<Date, std::pair<double, std::size_t>> acc;
  for (const auto& [date, a] : snapshots) {
    auto& slot = acc[date];
    slot.first += graph::mobility_indicator(a);
    ++slot.second;
  }
  std::vector<DatedIndicator> out;
  for (const auto& [date, slot] : acc) out.push_back({date, slot.first / static_cast<double>(slot.second)});
  return out;
}

std::vector<IndicatorTableRow> lockdown_indicator_table(const std::vector<DatedIndicator>& indicators,
                                                        const std::vector<LockdownWindow>& windows,
                                                        const IndicatorTableOptions& options) {
  std::map<Date, double> by_date;
  for (const auto& d : indicators) by_date[d.sample_start] = d.pi;

  // Values on the inclusive span [from, to] in date order; flags missing days.
  auto collect = [&](Date from, Date to, bool& partial) {
    std::vector<double> v;
    for (Date d = from; d <= to; d += std::chrono::days(1)) {
      const auto it = by_date.find(d);
      if (it == by_date.end()) {
        partial = true;
      } else {
        v.push_back(it->second);
      }
    }
    return v;
  };

  std::vector<IndicatorTableRow> rows;
  for (const auto& w : windows) {
    if (w.end < w.start) throw std::invalid_argument("lockdown window for " + w.region_id + " ends before it starts");
    IndicatorTableRow row;
    row.region = w.region_id;
    row.start = w.start;
    row.end = w.end;
    const auto during = collect(w.start, w.end, row.partial);
    row.during = mean_of(during);
    row.during_samples = during.size();

    const std::size_t pre_days = options.pre_days;
    if (pre_days > 0) {
      const auto pre = collect(w.start - std::chrono::days(pre_days), w.start - std::chrono::days(1), row.partial);
      row.pre_average = mean_of(pre);
      if (!pre.empty()) row.pre_first = pre.front();
      row.pre_samples = pre.size();
    }
    const std::size_t post_days = w.post_days.value_or(options.post_days);
    if (post_days > 0) {
      const auto post = collect(w.end + std::chrono::days(1), w.end + std::chrono::days(post_days), row.partial);
      row.post_average = mean_of(post);
      if (!post.empty()) row.post_last = post.back();
      row.post_samples = post.size();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_indicator_csv(const std::vector<IndicatorTableRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region,window,during,pre_average,pre_first,post_average,post_last,during_samples,pre_samples,"
         "post_samples,partial\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.region << ',' << data::format_date(r.start) << '/' << data::format_date(r.end) << ','
        << cell(r.during) << ',' << cell(r.pre_average) << ',' << cell(r.pre_first) << ','
        << cell(r.post_average) << ',' << cell(r.post_last) << ',' << r.during_samples << ','
        << r.pre_samples << ',' << r.post_samples << ',' << (r.partial ? 1 : 0) << '\n';
  }
}

std::string ramp_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  struct Rgb {
    double r, g, b;
  };
  constexpr Rgb blue{33, 102, 172}, white{247, 247, 247}, red{178, 24, 43};
  const Rgb& a = t < 0.5 ? blue : white;
  const Rgb& b = t < 0.5 ? white : red;
  const double u = t < 0.5 ? t / 0.5 : (t - 0.5) / 0.5;
  auto mix = [u](double x, double y) { return static_cast<int>(std::lround(x + (y - x) * u)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b));
  return buf;
}

std::string heatmap_svg(const Tensor& a, const std::vector<std::string>& labels) {
  const std::size_t n = square_size(a);
  if (labels.size() != n) throw std::invalid_argument("heatmap needs one label per row");
  double max = 0.0;
  for (double v : a.values()) max = std::max(max, v);

  constexpr int cell = 20, margin = 80;
  const int side = margin + cell * static_cast<int>(n) + 10;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    const int y = margin + cell * static_cast<int>(i);
    os << "<text class=\"label\" x=\"" << margin - 4 << "\" y=\"" << y + cell / 2 + 3
       << "\" text-anchor=\"end\">" << xml_escape(labels[i]) << "</text>\n";
  }
  for (std::size_t j = 0; j < n; ++j) {
    const int x = margin + cell * static_cast<int>(j) + cell / 2;
    os << "<text class=\"label\" x=\"" << x << "\" y=\"" << margin - 4 << "\" transform=\"rotate(-60 " << x << ' '
       << margin - 4 << ")\">" << xml_escape(labels[j]) << "</text>\n";
  }
  char value[32];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = a.at(i, j);
      std::snprintf(value, sizeof value, "%.6g", v);
      os << "<rect class=\"cell\" x=\"" << margin + cell * static_cast<int>(j) << "\" y=\""
         << margin + cell * static_cast<int>(i) << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
         << ramp_color(max > 0.0 ? v / max : 0.0) << "\"><title>" << xml_escape(labels[i]) << " / "
         << xml_escape(labels[j]) << ": " << value << "</title></rect>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_heatmap(const Tensor& a, const std::vector<std::string>& labels, const std::filesystem::path& path) {
  const std::string svg = heatmap_svg(a, labels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace spatio::analysis
