#pragma once

// Post-hoc statistics over saved generated adjacency matrices.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spatio/data/panel.hpp"
#include "spatio/numcore/tensor.hpp"

namespace spatio::analysis {

using data::Date;
using numcore::Tensor;

enum class Connectivity {
  kRowAndColumn,  // non-zero off-diagonal entries in row i plus column i
  kRowOnly,       // non-zero off-diagonal entries in row i
};

/// Per-region connectivity of one square matrix.
std::vector<std::size_t> connectivity(const Tensor& a, Connectivity mode = Connectivity::kRowAndColumn);

/// True when every off-diagonal entry is zero, so the matrix carries no edges.
bool is_identity_map(const Tensor& a);

struct VoteCount {
  std::size_t min_votes = 0;
  std::size_t max_votes = 0;
  bool operator==(const VoteCount&) const = default;
};

struct VoteResult {
  std::vector<VoteCount> votes;  // one per region
  std::size_t counted = 0;       // matrices that cast votes
  std::size_t skipped = 0;       // identity maps
};

/// Each non-identity matrix gives one min vote to every region attaining the
/// lowest connectivity and one max vote to every region attaining the
/// highest. Throws std::invalid_argument on non-square or mixed-size input.
VoteResult connectivity_votes(const std::vector<Tensor>& snapshots,
                              Connectivity mode = Connectivity::kRowAndColumn);

/// Mean of all strictly positive entries pooled across snapshots. Throws
/// std::invalid_argument when there are none.
double avg_nonzero_weight(const std::vector<Tensor>& snapshots);

struct LockdownWindow {
  std::string region_id;
  Date start;
  Date end;
  /// Overrides the table-wide post-window length for this region.
  std::optional<std::size_t> post_days;
};

/// `region,start,end[,post_days]`.
std::vector<LockdownWindow> read_lockdown_windows(const std::filesystem::path& path);

/// Mobility indicator of the snapshot(s) generated for the sample starting on
/// `sample_start`.
struct DatedIndicator {
  Date sample_start;
  double pi = 0.0;
};

/// Indicator per sample start date; several snapshots on one date (one per
/// block) are averaged. Result is sorted by date.
std::vector<DatedIndicator> indicators_by_date(const std::vector<std::pair<Date, Tensor>>& snapshots);

struct IndicatorTableRow {
  std::string region;
  Date start;
  Date end;
  std::optional<double> during;
  std::optional<double> pre_average;
  std::optional<double> pre_first;
  std::optional<double> post_average;
  std::optional<double> post_last;
  std::size_t during_samples = 0;
  std::size_t pre_samples = 0;
  std::size_t post_samples = 0;
  /// Some day of the pre, during or post span has no snapshot.
  bool partial = false;
};

struct IndicatorTableOptions {
  std::size_t pre_days = 24;
  std::size_t post_days = 24;
};

/// During = mean over samples starting inside [start, end]; pre = the
/// pre_days samples before start (pre-first is the earliest); post = the
/// post_days samples after end (post-last is the latest).
std::vector<IndicatorTableRow> lockdown_indicator_table(const std::vector<DatedIndicator>& indicators,
                                                        const std::vector<LockdownWindow>& windows,
                                                        const IndicatorTableOptions& options = {});

/// Columns: region, window, during, pre-average,
/// pre-first, post-average, post-last, then sample counts and the partial flag.
void write_indicator_csv(const std::vector<IndicatorTableRow>& rows, const std::filesystem::path& path);

/// RGB hex colour for t in [0, 1] on a blue-white-red ramp.
std::string ramp_color(double t);

/// N x N heatmap with row and column labels; colours scale over [0, max].
std::string heatmap_svg(const Tensor& a, const std::vector<std::string>& labels);
void write_heatmap(const Tensor& a, const std::vector<std::string>& labels, const std::filesystem::path& path);

}  // namespace spatio::analysis
