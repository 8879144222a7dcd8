#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spatio/data/panel.hpp"
#include "spatio/numcore/tensor.hpp"

namespace spatio::data {

/// One training instance: X covers days [start, start + T), Y the F days
/// immediately after.
struct WindowSample {
  numcore::Tensor x;  // N x T x C
  numcore::Tensor y;  // N x F x C
  Date start_date;
  std::size_t start_index = 0;
};

/// days - T - F + 1, or 0 when the panel is too short.
std::size_t window_count(std::size_t days, std::size_t window, std::size_t horizon);

/// Distinct forecast days covered by `samples` consecutive windows.
std::size_t forecast_timesteps(std::size_t samples, std::size_t horizon);

/// Chronological sliding windows over the whole panel. Throws DataError when
/// the panel holds fewer than T + F days.
std::vector<WindowSample> make_windows(const NormalizedPanel& panel, std::size_t window,
                                       std::size_t horizon);

/// Rebuilds the N x days x C value cube covered by a contiguous run of samples
/// (X blocks followed by the final Y block).
std::vector<double> reassemble(const std::vector<WindowSample>& samples);

/// Half-open [begin, end) range of sample indices.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const IndexRange&) const = default;
};

struct FoldSplit {
  /// 1..K for progressive folds, 0 for the final hold-out.
  int fold = 0;
  IndexRange train;
  IndexRange val;
  IndexRange test;

  bool is_final() const { return fold == 0; }
  std::string label() const { return is_final() ? "final" : std::to_string(fold); }
};

struct FoldPolicy {
  std::size_t folds = 5;
  /// Final test tail = floor(n * final_numerator / final_denominator).
  std::size_t final_numerator = 1;
  std::size_t final_denominator = 10;
  /// Train:val:test parts within each fold.
  std::size_t train_parts = 7;
  std::size_t val_parts = 1;
  std::size_t test_parts = 2;
  std::size_t min_samples = 50;
};

/// Progressive chronological folds. The last floor(n / 10)
/// samples form the final test set; fold k takes the first floor(k/K) share of
/// the remaining pool and splits it train/val/test with train =
/// floor(0.7 m), test = floor(0.2 m) and val taking the remainder. The final
/// split trains on the whole pool, divided train:val in the same 7:1 ratio.
/// Returns folds 1..K followed by the final split.
std::vector<FoldSplit> progressive_folds(std::size_t sample_count, const FoldPolicy& policy = {});

}  // namespace spatio::data
