#include "spatio/data/windows.hpp"

#include <algorithm>

namespace spatio::data {

std::size_t window_count(std::size_t days, std::size_t window, std::size_t horizon) {
  if (days < window + horizon) return 0;
  return days - window - horizon + 1;
}

std::size_t forecast_timesteps(std::size_t samples, std::size_t horizon) {
  return samples == 0 ? 0 : samples + horizon - 1;
}

std::vector<WindowSample> make_windows(const NormalizedPanel& panel, std::size_t window,
                                       std::size_t horizon) {
  if (window == 0 || horizon == 0) throw DataError("window and horizon must be positive");
  const std::size_t count = window_count(panel.days(), window, horizon);
  if (count == 0) {
    throw DataError("panel of " + std::to_string(panel.days()) + " days is shorter than T + F = " +
                    std::to_string(window + horizon));
  }
  const std::size_t n = panel.num_regions();
  const std::size_t c = panel.num_channels();
  std::vector<WindowSample> samples;
  samples.reserve(count);
  auto block = [&](std::size_t first_day, std::size_t length) {
    std::vector<double> v(n * length * c);
    for (std::size_t r = 0; r < n; ++r) {
      const double* src = panel.values.data() + panel.offset(r, first_day, 0);
      std::copy_n(src, length * c, v.data() + r * length * c);
    }
    return numcore::Tensor({n, length, c}, std::move(v));
  };
  for (std::size_t s = 0; s < count; ++s) {
    samples.push_back({block(s, window), block(s + window, horizon), panel.dates[s], s});
  }
  return samples;
}

std::vector<double> reassemble(const std::vector<WindowSample>& samples) {
  if (samples.empty()) return {};
  const auto& shape = samples.front().x.shape();
  const std::size_t n = shape[0];
  const std::size_t window = shape[1];
  const std::size_t c = shape[2];
  const std::size_t horizon = samples.front().y.shape()[1];
  const std::size_t days = samples.size() + window + horizon - 1;
  std::vector<double> cube(n * days * c, 0.0);
  auto put = [&](const numcore::Tensor& t, std::size_t first_day, std::size_t length,
                 std::size_t from_step) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t d = from_step; d < length; ++d)
        for (std::size_t k = 0; k < c; ++k)
          cube[(r * days + first_day + d) * c + k] = t.at(r, d, k);
  };
  for (std::size_t s = 0; s < samples.size(); ++s) {
    // Sample s contributes its first X day; the last sample contributes all.
    const bool last = s + 1 == samples.size();
    put(samples[s].x, s, last ? window : 1, 0);
  }
  put(samples.back().y, samples.size() - 1 + window, horizon, 0);
  return cube;
}

std::vector<FoldSplit> progressive_folds(std::size_t sample_count, const FoldPolicy& policy) {
  if (policy.folds == 0) throw DataError("fold count must be positive");
  if (sample_count < policy.min_samples) {
    throw DataError("progressive folds need at least " + std::to_string(policy.min_samples) +
                    " samples, got " + std::to_string(sample_count));
  }
  const std::size_t parts = policy.train_parts + policy.val_parts + policy.test_parts;
  if (parts == 0 || policy.final_denominator == 0) throw DataError("invalid fold ratios");
  const std::size_t final_size = sample_count * policy.final_numerator / policy.final_denominator;
  const std::size_t pool = sample_count - final_size;
  if (final_size == 0 || pool == 0) throw DataError("final test split would be empty");

  std::vector<FoldSplit> out;
  for (std::size_t k = 1; k <= policy.folds; ++k) {
    const std::size_t m = k * pool / policy.folds;
    const std::size_t train = m * policy.train_parts / parts;
    const std::size_t test = m * policy.test_parts / parts;
    const std::size_t val = m - train - test;
    if (train == 0 || val == 0 || test == 0) {
      throw DataError("fold " + std::to_string(k) + " of " + std::to_string(m) +
                      " samples leaves an empty split");
    }
    FoldSplit f;
    f.fold = static_cast<int>(k);
    f.train = {0, train};
    f.val = {train, train + val};
    f.test = {train + val, m};
    out.push_back(f);
  }
  const std::size_t final_train = pool * policy.train_parts / (policy.train_parts + policy.val_parts);
  if (final_train == 0 || final_train == pool) throw DataError("final split leaves an empty train/val range");
  FoldSplit final_split;
  final_split.fold = 0;
  final_split.train = {0, final_train};
  final_split.val = {final_train, pool};
  final_split.test = {pool, sample_count};
  out.push_back(final_split);
  return out;
}

}  // namespace spatio::data
