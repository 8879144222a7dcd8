#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatio/data/windows.hpp"
#include "spatio/evaluation/metrics.hpp"
#include "spatio/model/forward.hpp"
#include "spatio/model/params.hpp"

namespace spatio::training {

using numcore::Tensor;

enum class LossKind { kMse, kMae };

LossKind parse_loss_kind(const std::string& name);
const char* loss_kind_name(LossKind kind);

struct TrainConfig {
  double peak_lr = 0.001;
  std::size_t warmup_steps = 20000;
  std::size_t max_steps = 20000;
  std::size_t batch_size = 16;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  /// Stop after this many steps without a better validation MAE; 0 disables.
  std::size_t patience = 0;
  LossKind loss_kind = LossKind::kMse;
  std::size_t eval_every = 100;
  /// Per-channel z-scoring fitted on the training range.
  bool standardize = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// peak_lr * min(step / warmup, sqrt(warmup / step)) for step >= 1.
double warmup_schedule(std::size_t step, const TrainConfig& config);

/// Mean absolute or mean squared error over all elements.
Tensor loss(const Tensor& pred, const Tensor& target, LossKind kind);

/// First/second-moment optimizer over a fixed parameter set.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  /// Applies one update from the gradients currently held by `params`.
  void step(model::ModelParams& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Per-channel affine scaling of model inputs and targets.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  /// Identity scaling for `channels` channels.
  static Standardizer identity(std::size_t channels);
  /// Fits over every value covered by samples[range] (inputs and targets).
  static Standardizer fit(const std::vector<data::WindowSample>& samples, data::IndexRange range);

  /// Scales the trailing channel axis of an N x L x C block.
  Tensor apply(const Tensor& block) const;
  /// Inverse of apply() for channel `channel` of a raw value.
  double invert(double value, std::size_t channel) const { return value * scale[channel] + mean[channel]; }
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_mae;
  std::optional<double> val_rmse;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::optional<std::size_t> best_step;
  double best_val_mae = 0.0;

  /// `step,lr,train_loss,val_mae,val_rmse`; validation cells are empty on
  /// steps without an evaluation.
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainData {
  const std::vector<data::WindowSample>* samples = nullptr;
  data::FoldSplit split;
  /// Raw geographic weights; required by the GCN variants.
  const Tensor* geographic = nullptr;
};

struct TrainResult {
  model::ModelParams best;
  TrainHistory history;
  Standardizer scaler;
};

struct TrainHooks {
  /// Called with the step and parameters whenever validation improves.
  std::function<void(std::size_t, const model::ModelParams&)> on_best;
};

/// Incidence forecasts (N x F, de-standardized) for one sample.
std::vector<double> predict_incidence(const model::ModelConfig& config, const model::ModelParams& params,
                                      const Standardizer& scaler, const data::WindowSample& sample,
                                      const Tensor* geographic,
                                      std::vector<graph::GeneratedAdjacency>* generated = nullptr);

/// Incidence targets (N x F) of one sample in original units.
std::vector<double> incidence_target(const data::WindowSample& sample);

/// Scores `params` on samples[range] with the de-overlapped metrics.
evaluation::Metrics evaluate_range(const model::ModelConfig& config, const model::ModelParams& params,
                                   const Standardizer& scaler, const std::vector<data::WindowSample>& samples,
                                   data::IndexRange range, const Tensor* geographic);

/// Trains one model from seed `seed` and returns the parameters with the
/// lowest validation MAE on the incidence channel.
TrainResult train(const TrainConfig& config, const model::ModelConfig& model_config, std::uint64_t seed,
                  const TrainData& data, const TrainHooks& hooks = {});

}  // namespace spatio::training
