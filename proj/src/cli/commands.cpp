#include "spatio/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "spatio/analysis/analysis.hpp"
#include "spatio/graph/adjacency.hpp"
#include "spatio/model/params.hpp"

namespace spatio::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStatusCompleted = "completed";

class Log {
 public:
  explicit Log(const CommandOptions& o) : os_(o.log ? *o.log : std::cerr) {}
  template <typename... Args>
  void line(const Args&... args) {
    std::ostringstream ss;
    (ss << ... << args);
    std::lock_guard<std::mutex> lock(mu_);
    os_ << ss.str() << '\n';
  }

 private:
  std::ostream& os_;
  std::mutex mu_;
};

std::string compact_variant(model::Variant v) {
  std::string name = model::variant_name(v);
  name.erase(std::remove(name.begin(), name.end(), '+'), name.end());
  return name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const json& j, const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::optional<json> read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

bool completed(const std::optional<json>& m) {
  return m && m->value("status", std::string()) == kStatusCompleted;
}

data::NormalizedPanel select_channels(const data::NormalizedPanel& panel, const std::vector<data::Channel>& wanted) {
  std::vector<std::size_t> idx;
  for (auto c : wanted) {
    const auto i = panel.channel_index(c);
    if (!i) throw DataError(std::string("panel lacks channel ") + data::channel_code(c) + "; rerun ingest");
    idx.push_back(*i);
  }
  data::NormalizedPanel out;
  out.dates = panel.dates;
  out.regions = panel.regions;
  out.channels = wanted;
  out.values.resize(panel.num_regions() * panel.days() * wanted.size());
  for (std::size_t r = 0; r < panel.num_regions(); ++r) {
    for (std::size_t d = 0; d < panel.days(); ++d) {
      for (std::size_t c = 0; c < wanted.size(); ++c) out.value(r, d, c) = panel.value(r, d, idx[c]);
    }
  }
  return out;
}

data::FoldSplit find_split(const std::vector<data::FoldSplit>& splits, const std::string& label) {
  for (const auto& s : splits) {
    if (s.label() == label) return s;
  }
  throw ConfigError("fold " + label + " does not exist");
}

/// Data shared by every run of one experiment.
struct Context {
  const ExperimentConfig* config = nullptr;
  data::NormalizedPanel panel;
  std::string panel_hash;
  numcore::Tensor geographic;
  std::map<std::pair<std::string, std::size_t>, std::vector<data::WindowSample>> windows;

  const std::vector<data::WindowSample>& samples(const std::string& channels, std::size_t horizon) const {
    return windows.at({channels, horizon});
  }
};

Context load_context(const ExperimentConfig& config, const std::vector<RunSpec>& grid) {
  const fs::path panel_file = panel_path(config);
  if (!fs::exists(panel_file)) throw ConfigError("panel not found: " + panel_file.string() + " (run ingest first)");
  Context ctx;
  ctx.config = &config;
  ctx.panel = data::read_panel_csv(panel_file);
  ctx.panel_hash = hex64(fnv1a(read_file(panel_file)));

  const auto table = data::RegionTable::load_csv(config.regions);
  std::vector<data::Region> ordered;
  for (const auto& id : ctx.panel.regions) {
    const auto i = table.find(id);
    if (!i) throw DataError("region " + id + " is missing from " + config.regions.string());
    ordered.push_back(table[*i]);
  }
  const auto dist = graph::haversine_matrix(data::RegionTable(ordered));
  const std::size_t n = ordered.size();
  if (n > 1) {
    const double sigma = config.geo_sigma.value_or(graph::pairwise_distance_std(dist));
    const double kappa = config.geo_kappa.value_or(graph::pairwise_distance_mean(dist));
    ctx.geographic = graph::gaussian_kernel_adjacency(dist, sigma, kappa).weights;
  } else {
    ctx.geographic = numcore::Tensor({n, n}, std::vector<double>(n * n, 0.0));
  }

  for (const auto& spec : grid) {
    const auto key = std::make_pair(spec.channels, spec.horizon);
    if (ctx.windows.count(key)) continue;
    const auto sub = select_channels(ctx.panel, data::parse_channel_set(spec.channels));
    ctx.windows[key] = data::make_windows(sub, config.window, spec.horizon);
  }
  return ctx;
}

model::ModelConfig run_model_config(const Context& ctx, const RunSpec& spec) {
  model::ModelConfig m = ctx.config->model;
  m.variant = spec.variant;
  m.nodes = ctx.panel.num_regions();
  m.window = ctx.config->window;
  m.horizon = spec.horizon;
  m.channels = spec.channels.size();
  return m;
}

json run_config_json(const Context& ctx, const RunSpec& spec) {
  json j = semantic_json(*ctx.config);
  j["region_set"] = ctx.config->region_set;
  j["channels"] = spec.channels;
  j["variant"] = model::variant_name(spec.variant);
  j["horizon"] = spec.horizon;
  j["fold"] = spec.fold;
  j["seed"] = spec.seed;
  j["panel_hash"] = ctx.panel_hash;
  return j;
}

std::string config_hash(const json& run_config) { return hex64(fnv1a(run_config.dump())); }

json scaler_json(const training::Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

training::Standardizer scaler_from_json(const json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

json metrics_json(const evaluation::Metrics& m) { return {{"mae", m.mae}, {"rmse", m.rmse}, {"count", m.count}}; }

/// Scores the test range, writes metrics.csv and (for Adp variants) snapshots.
json evaluate_run(const Context& ctx, const RunSpec& spec, const model::ModelParams& params,
                  const training::Standardizer& scaler, const fs::path& dir) {
  const auto& cfg = *ctx.config;
  const auto model_cfg = run_model_config(ctx, spec);
  const auto& samples = ctx.samples(spec.channels, spec.horizon);
  const auto split = find_split(data::progressive_folds(samples.size(), cfg.fold_policy), spec.fold);
  const numcore::Tensor* geo = model::uses_geographic(spec.variant) ? &ctx.geographic : nullptr;
  const bool adp = model::uses_generated(spec.variant);

  const fs::path snap_dir = dir / "snapshots";
  fs::remove_all(snap_dir);
  if (adp) fs::create_directories(snap_dir);
  const data::IndexRange snap_range =
      cfg.snapshot_range == SnapshotRange::kTest ? split.test : data::IndexRange{0, samples.size()};

  evaluation::ForecastSet set{model_cfg.nodes, model_cfg.horizon, {}, {}};
  const std::size_t lo = std::min(split.test.begin, adp ? snap_range.begin : split.test.begin);
  const std::size_t hi = std::max(split.test.end, adp ? snap_range.end : split.test.end);
  for (std::size_t s = lo; s < hi; ++s) {
    const bool scored = s >= split.test.begin && s < split.test.end;
    const bool snapped = adp && s >= snap_range.begin && s < snap_range.end;
    if (!scored && !snapped) continue;
    std::vector<graph::GeneratedAdjacency> generated;
    auto pred = training::predict_incidence(model_cfg, params, scaler, samples[s], geo, snapped ? &generated : nullptr);
    if (scored) set.add(std::move(pred), training::incidence_target(samples[s]));
    for (std::size_t b = 0; b < generated.size(); ++b) {
      const std::string date = data::format_date(samples[s].start_date);
      graph::write_snapshot({generated[b].weights, b, date}, snap_dir / (date + "_b" + std::to_string(b) + ".csv"));
    }
  }
  const auto deoverlapped = evaluation::deoverlapped_metrics(set);
  const auto pooled = evaluation::pooled_metrics(set);
  const evaluation::MetricRecord record{cfg.region_set, spec.fold,    spec.horizon,     model::variant_name(spec.variant),
                                        spec.channels,  spec.seed,    deoverlapped.mae, deoverlapped.rmse};
  evaluation::write_metrics_csv({record}, dir / "metrics.csv");
  return {{"deoverlapped", metrics_json(deoverlapped)},
          {"pooled", metrics_json(pooled)},
          {"test_samples", split.test.size()},
          {"test_first_day", data::format_date(samples[split.test.begin].start_date + std::chrono::days(cfg.window))}};
}

void execute_run(const Context& ctx, const RunSpec& spec, const fs::path& dir, const json& run_config, Log& log) {
  const auto& cfg = *ctx.config;
  fs::remove_all(dir);
  fs::create_directories(dir);
  json manifest;
  manifest["id"] = run_id(cfg, spec);
  manifest["status"] = "running";
  manifest["config_hash"] = config_hash(run_config);
  manifest["config"] = run_config;
  manifest["regions"] = ctx.panel.regions;
  write_json(manifest, dir / "manifest.json");

  try {
    const auto model_cfg = run_model_config(ctx, spec);
    const auto& samples = ctx.samples(spec.channels, spec.horizon);
    const auto split = find_split(data::progressive_folds(samples.size(), cfg.fold_policy), spec.fold);
    training::TrainData data{&samples, split,
                             model::uses_geographic(spec.variant) ? &ctx.geographic : nullptr};
    auto result = training::train(cfg.train, model_cfg, spec.seed, data);
    const std::size_t best_step = result.history.best_step.value_or(0);
    const std::string ckpt = "ckpt-" + std::to_string(best_step);
    model::save_checkpoint(result.best, dir / ckpt);
    result.history.write_csv(dir / "history.csv");
    const json test = evaluate_run(ctx, spec, result.best, result.scaler, dir);

    manifest["status"] = kStatusCompleted;
    manifest["checkpoint"] = ckpt;
    manifest["best_step"] = best_step;
    manifest["best_val_mae"] = result.history.best_step ? json(result.history.best_val_mae) : json(nullptr);
    manifest["steps_run"] = result.history.steps.size();
    manifest["parameters"] = model::parameter_count(model_cfg);
    manifest["fingerprint"] = hex64(result.best.fingerprint());
    manifest["scaler"] = scaler_json(result.scaler);
    manifest["split"] = {{"train", {split.train.begin, split.train.end}},
                         {"val", {split.val.begin, split.val.end}},
                         {"test", {split.test.begin, split.test.end}}};
    manifest["test"] = test;
    write_json(manifest, dir / "manifest.json");
    log.line(manifest["id"].get<std::string>(), ": best step ", best_step, ", test MAE ",
             test["deoverlapped"]["mae"].get<double>());
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    write_json(manifest, dir / "manifest.json");
    throw;
  }
}

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads; returns the
/// number of calls that threw.
template <typename Fn>
std::size_t parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
  std::atomic<std::size_t> next{0}, failures{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      if (!fn(i)) ++failures;
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return failures;
}

struct CompletedRun {
  std::string id;
  fs::path dir;
  json manifest;
};

std::vector<CompletedRun> completed_runs(const ExperimentConfig& config) {
  std::vector<CompletedRun> out;
  const fs::path root = runs_dir(config);
  if (!fs::exists(root)) return out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto m = read_manifest(d);
    if (completed(m)) out.push_back({d.filename().string(), d, std::move(*m)});
  }
  return out;
}

std::vector<std::string> missing_runs(const ExperimentConfig& config) {
  std::vector<std::string> out;
  for (const auto& spec : run_grid(config)) {
    const std::string id = run_id(config, spec);
    if (!completed(read_manifest(runs_dir(config) / id))) out.push_back(id);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

}  // namespace

std::string run_id(const ExperimentConfig& config, const RunSpec& spec) {
  return config.region_set + "_" + spec.channels + "_" + compact_variant(spec.variant) + "_F" +
         std::to_string(spec.horizon) + "_fold" + spec.fold + "_seed" + std::to_string(spec.seed);
}

std::vector<RunSpec> run_grid(const ExperimentConfig& config) {
  std::vector<RunSpec> grid;
  for (auto v : config.variants) {
    for (const auto& ch : config.channel_sets) {
      for (auto f : config.horizons) {
        for (const auto& fold : config.fold_labels()) {
          for (auto seed : config.train.seeds) grid.push_back({ch, v, f, fold, seed});
        }
      }
    }
  }
  return grid;
}

fs::path panel_path(const ExperimentConfig& config) { return config.output / "panel.csv"; }
fs::path runs_dir(const ExperimentConfig& config) { return config.output / "runs"; }

int cmd_ingest(const ExperimentConfig& config, const CommandOptions& options) {
  Log log(options);
  const auto regions = data::RegionTable::load_csv(config.regions);
  std::vector<data::ChannelSource> sources;
  for (const auto& [channel, path] : config.data) sources.push_back({channel, path});
  const auto raw = data::load_panel(sources, regions);
  const std::size_t missing = raw.missing_count();
  const auto imputed = data::impute(raw);
  const auto panel = data::normalize_per_capita(imputed.panel, regions);
  fs::create_directories(config.output);
  data::write_panel_csv(panel, panel_path(config));
  data::write_imputation_log(imputed.log, config.output / "imputation_log.csv");
  log.line("ingest: ", panel.num_regions(), " regions, ", panel.days(), " days (",
           data::format_date(panel.dates.front()), " to ", data::format_date(panel.dates.back()), "), channels ",
           data::channel_set_label(panel.channels), "; ", missing, " missing cells, ", imputed.log.size(),
           " imputation log entries");
  log.line("wrote ", panel_path(config).string());
  return kExitOk;
}

int cmd_folds(const ExperimentConfig& config, const CommandOptions& options) {
  Log log(options);
  const fs::path panel_file = panel_path(config);
  if (!fs::exists(panel_file)) throw ConfigError("panel not found: " + panel_file.string() + " (run ingest first)");
  const auto panel = data::read_panel_csv(panel_file);
  const fs::path out = config.output / "folds.csv";
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << "horizon,fold,train_begin,train_end,val_begin,val_end,test_begin,test_end,test_samples,test_timesteps,"
        "test_first_day,test_last_day\n";
  for (auto f : config.horizons) {
    const std::size_t n = data::window_count(panel.days(), config.window, f);
    for (const auto& s : data::progressive_folds(n, config.fold_policy)) {
      const auto first = panel.dates.front() + std::chrono::days(s.test.begin + config.window);
      const std::size_t steps = data::forecast_timesteps(s.test.size(), f);
      const auto last = first + std::chrono::days(steps - 1);
      os << f << ',' << s.label() << ',' << s.train.begin << ',' << s.train.end << ',' << s.val.begin << ','
         << s.val.end << ',' << s.test.begin << ',' << s.test.end << ',' << s.test.size() << ',' << steps << ','
         << data::format_date(first) << ',' << data::format_date(last) << '\n';
      log.line("T=", config.window, " F=", f, " fold ", s.label(), ": train ", s.train.size(), ", val ", s.val.size(),
               ", test ", s.test.size(), " samples / ", steps, " timesteps");
    }
  }
  log.line("wrote ", out.string());
  return kExitOk;
}

int cmd_train(const ExperimentConfig& config, const CommandOptions& options) {
  Log log(options);
  const auto grid = run_grid(config);
  const Context ctx = load_context(config, grid);

  std::vector<json> run_configs;
  std::vector<std::string> refused;
  for (const auto& spec : grid) {
    run_configs.push_back(run_config_json(ctx, spec));
    const auto existing = read_manifest(runs_dir(config) / run_id(config, spec));
    if (options.force || !completed(existing)) continue;
    const std::string old_hash = existing->value("config_hash", std::string());
    const std::string new_hash = config_hash(run_configs.back());
    refused.push_back(run_id(config, spec) + (old_hash == new_hash ? " (same config hash " + new_hash + ")"
                                                                     : " (config hash " + old_hash + " -> " + new_hash + ")"));
  }
  if (!refused.empty()) {
    log.line("refusing to overwrite ", refused.size(), " completed run(s); pass --force to retrain:");
    for (const auto& r : refused) log.line("  ", r);
    return kExitConfigError;
  }

  log.line("train: ", grid.size(), " run(s) on ", std::max<std::size_t>(1, std::min(options.jobs, grid.size())),
           " worker(s)");
  const std::size_t failures = parallel_for(grid.size(), options.jobs, [&](std::size_t i) {
    const std::string id = run_id(config, grid[i]);
    try {
      execute_run(ctx, grid[i], runs_dir(config) / id, run_configs[i], log);
      return true;
    } catch (const std::exception& e) {
      log.line(id, ": FAILED: ", e.what());
      return false;
    }
  });
  log.line("train: ", grid.size() - failures, " completed, ", failures, " failed");
  return failures ? kExitRunFailure : kExitOk;
}

int cmd_evaluate(const ExperimentConfig& config, const CommandOptions& options) {
  Log log(options);
  const auto grid = run_grid(config);
  const Context ctx = load_context(config, grid);
  std::vector<std::size_t> present;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string id = run_id(config, grid[i]);
    if (completed(read_manifest(runs_dir(config) / id))) present.push_back(i);
    else missing.push_back(id);
  }
  const std::size_t failures = parallel_for(present.size(), options.jobs, [&](std::size_t k) {
    const auto& spec = grid[present[k]];
    const fs::path dir = runs_dir(config) / run_id(config, spec);
    try {
      json manifest = *read_manifest(dir);
      const auto params = model::load_checkpoint(dir / manifest.at("checkpoint").get<std::string>());
      manifest["test"] = evaluate_run(ctx, spec, params, scaler_from_json(manifest.at("scaler")), dir);
      write_json(manifest, dir / "manifest.json");
      log.line(run_id(config, spec), ": test MAE ", manifest["test"]["deoverlapped"]["mae"].get<double>());
      return true;
    } catch (const std::exception& e) {
      log.line(run_id(config, spec), ": FAILED: ", e.what());
      return false;
    }
  });
  if (!missing.empty()) log.line("missing runs (", missing.size(), "): ", join(missing, ", "));
  return failures || !missing.empty() ? kExitRunFailure : kExitOk;
}

int cmd_analyze(const ExperimentConfig& config, const CommandOptions& options,
                const std::optional<fs::path>& target) {
  Log log(options);
  const auto& a = config.analysis;
  const std::size_t horizon = a.horizon.value_or(*std::max_element(config.horizons.begin(), config.horizons.end()));
  const std::string channels = a.channels.value_or(config.channel_sets.front());
  const std::size_t block = a.block.value_or(config.model.layers - 1);
  const std::string variant = model::variant_name(a.variant);

  std::vector<CompletedRun> selected;
  for (auto& run : completed_runs(config)) {
    const auto& c = run.manifest.at("config");
    if (c.value("region_set", "") == config.region_set && c.value("variant", "") == variant &&
        c.value("horizon", std::size_t{0}) == horizon && c.value("fold", "") == a.fold &&
        c.value("channels", "") == channels) {
      selected.push_back(std::move(run));
    }
  }
  const std::string what = variant + " F=" + std::to_string(horizon) + " fold " + a.fold + " " + channels;
  if (selected.empty()) {
    log.line("analyze: no completed runs for ", what);
    return kExitRunFailure;
  }

  std::vector<std::pair<data::Date, numcore::Tensor>> dated;
  std::vector<numcore::Tensor> maps;
  for (const auto& run : selected) {
    const fs::path snaps = run.dir / "snapshots";
    if (!fs::exists(snaps)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(snaps)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto snap = graph::read_snapshot(f);
      if (snap.block != block) continue;
      dated.emplace_back(data::parse_date(snap.sample_start), snap.weights);
      maps.push_back(snap.weights);
    }
  }
  if (maps.empty()) {
    log.line("analyze: runs for ", what, " hold no block-", block, " snapshots");
    return kExitRunFailure;
  }
  const auto labels = selected.front().manifest.at("regions").get<std::vector<std::string>>();
  if (labels.size() != maps.front().dim(0)) throw DataError("snapshot size does not match the run's region list");

  const fs::path out = target.value_or(config.output / "analysis");
  fs::create_directories(out);

  const auto votes = analysis::connectivity_votes(maps, a.connectivity);
  {
    std::ofstream os(out / "votes.csv");
    os << "region,min_votes,max_votes\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      os << labels[i] << ',' << votes.votes[i].min_votes << ',' << votes.votes[i].max_votes << '\n';
    }
  }
  const auto indicators = analysis::indicators_by_date(dated);
  double mean_pi = 0.0;
  for (const auto& d : indicators) mean_pi += d.pi;
  mean_pi /= static_cast<double>(indicators.size());
  {
    std::ofstream os(out / "summary.csv");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6f,%.6f\n", selected.size(), maps.size(), votes.counted,
                  votes.skipped, analysis::avg_nonzero_weight(maps), mean_pi);
    os << "runs,snapshots,counted,identity_skipped,avg_nonzero_weight,mean_pi\n" << buf;
  }
  {
    std::ofstream os(out / "indicator_by_date.csv");
    os << "sample_start,pi\n";
    char buf[64];
    for (const auto& d : indicators) {
      std::snprintf(buf, sizeof buf, "%.6f", d.pi);
      os << data::format_date(d.sample_start) << ',' << buf << '\n';
    }
  }
  if (a.lockdowns) {
    const auto windows = analysis::read_lockdown_windows(*a.lockdowns);
    const auto rows = analysis::lockdown_indicator_table(indicators, windows, a.indicator);
    analysis::write_indicator_csv(rows, out / "indicator_table.csv");
    const auto partial = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.partial; });
    log.line("analyze: ", rows.size(), " lockdown rows (", partial, " partial)");
  }

  const std::size_t n = labels.size();
  std::vector<double> mean(n * n, 0.0);
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < n * n; ++i) mean[i] += m[i] / static_cast<double>(maps.size());
  }
  analysis::write_heatmap(numcore::Tensor({n, n}, mean), labels, out / "heatmap_mean.svg");
  analysis::write_heatmap(maps.front(), labels, out / "heatmap_first.svg");
  analysis::write_heatmap(maps.back(), labels, out / "heatmap_last.svg");
  log.line("analyze: ", what, ": ", selected.size(), " run(s), ", maps.size(), " maps, mean Pi ", mean_pi, " -> ",
           out.string());
  return kExitOk;
}

int cmd_report(const ExperimentConfig& config, const CommandOptions& options) {
  Log log(options);
  const auto runs = completed_runs(config);
  if (runs.empty()) {
    log.line("report: 0 completed runs in ", runs_dir(config).string());
    return kExitRunFailure;
  }
  const auto missing = missing_runs(config);
  if (!missing.empty()) log.line("report: missing runs (", missing.size(), "): ", join(missing, ", "));

  std::vector<evaluation::MetricRecord> records;
  for (const auto& run : runs) {
    for (auto& r : evaluation::read_metrics_csv(run.dir / "metrics.csv")) records.push_back(std::move(r));
  }
  const fs::path out = config.output / "report";
  fs::create_directories(out);
  evaluation::write_metrics_csv(records, out / "metrics.csv");
  evaluation::write_aggregate_csv(evaluation::aggregate_records(records), out / "aggregate.csv");

  std::set<std::string> channel_sets, variants;
  for (const auto& r : records) {
    channel_sets.insert(r.channels);
    variants.insert(r.variant);
  }
  std::vector<evaluation::Comparison> by_channels = config.comparisons;
  if (by_channels.empty()) {
    for (const auto& [lhs, rhs] : std::vector<std::pair<std::string, std::string>>{
             {"IB", "I"}, {"IMH", "IB"}, {"IMH", "I"}, {"IBMH", "IMH"}}) {
      if (channel_sets.count(lhs) && channel_sets.count(rhs)) by_channels.push_back({lhs, rhs});
    }
  }
  if (!by_channels.empty()) {
    evaluation::write_t_test_csv(evaluation::t_test_table(records, by_channels, config.pooled_t_test),
                                 out / "ttest_channels.csv");
  }
  std::vector<evaluation::Comparison> by_variant;
  const std::string base = model::variant_name(model::Variant::kTrans);
  if (variants.count(base)) {
    for (const auto& v : variants) {
      if (v != base) by_variant.push_back({v, base, evaluation::Sided::kLess, evaluation::ComparisonAxis::kVariant});
    }
  }
  if (!by_variant.empty()) {
    evaluation::write_t_test_csv(evaluation::t_test_table(records, by_variant, config.pooled_t_test),
                                 out / "ttest_variants.csv");
  }
  log.line("report: ", runs.size(), " completed run(s), ", records.size(), " metric rows -> ", out.string());

  if (std::any_of(records.begin(), records.end(),
                  [](const auto& r) { return model::uses_generated(model::parse_variant(r.variant)); })) {
    cmd_analyze(config, options, out / "analysis");
  }
  return missing.empty() ? kExitOk : kExitRunFailure;
}

int run_command(const std::string& command, const fs::path& config_path, const CommandOptions& options) {
  std::ostream& err = options.log ? *options.log : std::cerr;
  try {
    ExperimentConfig config = load_config(config_path);
    if (options.seeds) config.train.seeds = *options.seeds;
    config.validate(command == "ingest");
    if (command == "ingest") return cmd_ingest(config, options);
    if (command == "folds") return cmd_folds(config, options);
    if (command == "train") return cmd_train(config, options);
    if (command == "evaluate") return cmd_evaluate(config, options);
    if (command == "analyze") return cmd_analyze(config, options);
    if (command == "report") return cmd_report(config, options);
    err << "unknown command '" << command << "'\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
}

}  // namespace spatio::cli
