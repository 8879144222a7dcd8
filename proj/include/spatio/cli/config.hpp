#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "spatio/analysis/analysis.hpp"
#include "spatio/data/windows.hpp"
#include "spatio/evaluation/metrics.hpp"
#include "spatio/model/config.hpp"
#include "spatio/training/train.hpp"

namespace spatio::cli {

/// Invalid or inconsistent experiment configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SnapshotRange { kTest, kAll };

struct AnalysisConfig {
  model::Variant variant = model::Variant::kTransAdp;
  /// Defaults to the longest configured horizon.
  std::optional<std::size_t> horizon;
  std::string fold = "final";
  /// Defaults to the first configured channel set.
  std::optional<std::string> channels;
  /// Block whose maps are analysed; defaults to the last one.
  std::optional<std::size_t> block;
  std::optional<std::filesystem::path> lockdowns;
  analysis::IndicatorTableOptions indicator;
  analysis::Connectivity connectivity = analysis::Connectivity::kRowAndColumn;
};

struct ExperimentConfig {
  std::string region_set = "default";
  std::filesystem::path regions;
  std::map<data::Channel, std::filesystem::path> data;
  std::vector<std::string> channel_sets{"I"};
  std::size_t window = 12;
  std::vector<std::size_t> horizons{3};
  std::vector<model::Variant> variants{model::Variant::kTrans};
  /// Fold labels to run ("1".."K", "final"); all when empty.
  std::vector<std::string> folds;
  data::FoldPolicy fold_policy;
  /// Dimensions and adjacency options; extents are filled per run.
  model::ModelConfig model;
  training::TrainConfig train;
  std::optional<double> geo_sigma;
  std::optional<double> geo_kappa;
  std::filesystem::path output = "out";
  SnapshotRange snapshot_range = SnapshotRange::kTest;
  AnalysisConfig analysis;
  /// Channel-set comparisons; the standard pairs that are present when empty.
  std::vector<evaluation::Comparison> comparisons;
  bool pooled_t_test = false;

  /// Throws ConfigError. With `check_paths`, every referenced file must exist.
  void validate(bool check_paths) const;
  std::vector<std::string> fold_labels() const;
};

/// Parses the YAML experiment file; relative paths resolve against its
/// directory and SPATIO_OUT overrides `output`.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Parses "1,2,3" into seeds. Throws ConfigError.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Fields that change a run's outcome, as canonical JSON.
nlohmann::json semantic_json(const ExperimentConfig& config);

/// FNV-1a 64 over bytes.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t value);

}  // namespace spatio::cli
