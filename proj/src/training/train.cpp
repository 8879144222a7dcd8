#include "spatio/training/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "spatio/numcore/ops.hpp"

namespace spatio::training {

namespace nc = numcore;

LossKind parse_loss_kind(const std::string& name) {
  if (name == "mse" || name == "MSE") return LossKind::kMse;
  if (name == "mae" || name == "MAE") return LossKind::kMae;
  throw std::invalid_argument("unknown loss '" + name + "' (expected mse or mae)");
}

const char* loss_kind_name(LossKind kind) { return kind == LossKind::kMse ? "mse" : "mae"; }

void TrainConfig::validate() const {
  if (!(peak_lr > 0.0)) throw std::invalid_argument("peak_lr must be positive");
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
}

double warmup_schedule(std::size_t step, const TrainConfig& config) {
  if (step < 1) throw std::invalid_argument("schedule steps start at 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(config.warmup_steps);
  return config.peak_lr * std::min(s / w, std::sqrt(w / s));
}

Tensor loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  if (pred.shape() != target.shape()) {
    throw nc::ShapeError("loss inputs " + nc::shape_string(pred.shape()) + " and " +
                         nc::shape_string(target.shape()) + " differ");
  }
  const Tensor diff = nc::sub(pred, target);
  return nc::mean(kind == LossKind::kMse ? nc::square(diff) : nc::abs(diff));
}

Adam::Adam(double beta1, double beta2, double epsilon) : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(model::ModelParams& params, double lr) {
  auto& entries = params.entries();
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.tensor.size(), 0.0);
      v_.emplace_back(e.tensor.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& tensor = entries[p].tensor;
    if (!tensor.has_grad()) continue;
    const auto g = tensor.grad();
    auto w = tensor.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + epsilon_);
    }
  }
}

Standardizer Standardizer::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Standardizer Standardizer::fit(const std::vector<data::WindowSample>& samples, data::IndexRange range) {
  if (range.empty() || range.end > samples.size()) throw std::invalid_argument("standardizer needs a non-empty range");
  const std::vector<data::WindowSample> run(samples.begin() + static_cast<std::ptrdiff_t>(range.begin),
                                            samples.begin() + static_cast<std::ptrdiff_t>(range.end));
  const std::vector<double> cube = data::reassemble(run);
  const std::size_t channels = run.front().x.dim(2);
  Standardizer s = identity(channels);
  const std::size_t per_channel = cube.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = c; i < cube.size(); i += channels) sum += cube[i];
    const double mean = sum / static_cast<double>(per_channel);
    double ss = 0.0;
    for (std::size_t i = c; i < cube.size(); i += channels) ss += (cube[i] - mean) * (cube[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(per_channel));
    s.mean[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Tensor Standardizer::apply(const Tensor& block) const {
  const std::size_t channels = block.dim(block.rank() - 1);
  if (channels != mean.size()) throw nc::ShapeError("standardizer channel count mismatch");
  std::vector<double> v = block.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i % channels]) / scale[i % channels];
  return Tensor(block.shape(), std::move(v));
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,lr,train_loss,val_mae,val_rmse\n";
  char buf[128];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", s.step, s.lr, s.train_loss);
    out << buf;
    if (s.val_mae) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", *s.val_mae, *s.val_rmse);
      out << buf;
    } else {
      out << ',';
    }
    out << '\n';
  }
}

namespace {

// Incidence is always the first channel of a canonical channel set.
constexpr std::size_t kIncidence = 0;

Tensor training_target(const model::ModelConfig& config, const Standardizer& scaler, const Tensor& y) {
  const Tensor scaled = scaler.apply(y);
  if (config.variant != model::Variant::kDLinear) return scaled;
  return nc::slice_last(scaled, kIncidence, 1);
}

}  // namespace

std::vector<double> predict_incidence(const model::ModelConfig& config, const model::ModelParams& params,
                                      const Standardizer& scaler, const data::WindowSample& sample,
                                      const Tensor* geographic,
                                      std::vector<graph::GeneratedAdjacency>* generated) {
  auto result = model::forward(config, params, scaler.apply(sample.x), geographic);
  const Tensor& pred = result.prediction;
  const std::size_t n = pred.dim(0), f = pred.dim(1), d = pred.dim(2);
  std::vector<double> out(n * f);
  for (std::size_t i = 0; i < n * f; ++i) out[i] = scaler.invert(pred[i * d + kIncidence], kIncidence);
  if (generated) *generated = std::move(result.generated);
  return out;
}

std::vector<double> incidence_target(const data::WindowSample& sample) {
  const Tensor& y = sample.y;
  const std::size_t n = y.dim(0), f = y.dim(1), c = y.dim(2);
  std::vector<double> out(n * f);
  for (std::size_t i = 0; i < n * f; ++i) out[i] = y[i * c + kIncidence];
  return out;
}

evaluation::Metrics evaluate_range(const model::ModelConfig& config, const model::ModelParams& params,
                                   const Standardizer& scaler, const std::vector<data::WindowSample>& samples,
                                   data::IndexRange range, const Tensor* geographic) {
  evaluation::ForecastSet set{config.nodes, config.horizon, {}, {}};
  for (std::size_t s = range.begin; s < range.end; ++s) {
    set.add(predict_incidence(config, params, scaler, samples[s], geographic), incidence_target(samples[s]));
  }
  return evaluation::deoverlapped_metrics(set);
}

TrainResult train(const TrainConfig& config, const model::ModelConfig& model_config, std::uint64_t seed,
                  const TrainData& data, const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (!data.samples) throw std::invalid_argument("train needs samples");
  const auto& samples = *data.samples;
  const auto& split = data.split;
  if (split.train.empty() || split.val.empty() || split.val.end > samples.size()) {
    throw std::invalid_argument("train needs non-empty train and validation ranges");
  }

  TrainResult result{model::init_params(model_config, seed), {},
                     config.standardize ? Standardizer::fit(samples, split.train)
                                        : Standardizer::identity(model_config.channels)};
  if (config.max_steps == 0) return result;

  model::ModelParams params = result.best.clone();
  std::vector<Tensor> inputs, targets;
  for (std::size_t s = split.train.begin; s < split.train.end; ++s) {
    inputs.push_back(result.scaler.apply(samples[s].x));
    targets.push_back(training_target(model_config, result.scaler, samples[s].y));
  }

  std::vector<data::IndexRange> batches;
  for (std::size_t b = 0; b < inputs.size(); b += config.batch_size) {
    batches.push_back({b, std::min(b + config.batch_size, inputs.size())});
  }
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(batches.size());
  std::size_t cursor = order.size();

  Adam optimizer(config.beta1, config.beta2, config.epsilon);
  double best = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const auto batch = batches[order[cursor++]];

    params.zero_grad();
    double loss_value = 0.0;
    {
      nc::Tape tape;
      nc::TapeScope scope(tape);
      std::optional<Tensor> total;
      for (std::size_t i = batch.begin; i < batch.end; ++i) {
        const Tensor pred = model::forward(model_config, params, inputs[i], data.geographic).prediction;
        const Tensor l = loss(pred, targets[i], config.loss_kind);
        total = total ? nc::add(*total, l) : l;
      }
      const Tensor mean_loss = nc::scale(*total, 1.0 / static_cast<double>(batch.size()));
      loss_value = mean_loss.item();
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("training loss became non-finite at step " + std::to_string(step));
      }
      tape.backward(mean_loss);
    }
    const double lr = warmup_schedule(step, config);
    optimizer.step(params, lr);

    StepRecord record{step, lr, loss_value, std::nullopt, std::nullopt};
    if (step % config.eval_every == 0 || step == config.max_steps) {
      const auto m = evaluate_range(model_config, params, result.scaler, samples, split.val, data.geographic);
      record.val_mae = m.mae;
      record.val_rmse = m.rmse;
      if (m.mae < best) {
        best = m.mae;
        last_improvement = step;
        result.best = params.clone();
        result.history.best_step = step;
        result.history.best_val_mae = m.mae;
        if (hooks.on_best) hooks.on_best(step, result.best);
      }
    }
    result.history.steps.push_back(record);
    if (config.patience > 0 && step - last_improvement >= config.patience) break;
  }
  return result;
}

}  // namespace spatio::training
