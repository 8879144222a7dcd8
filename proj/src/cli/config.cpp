#include "spatio/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace spatio::cli {

namespace {

namespace fs = std::filesystem;

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where) {
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const std::string& key, T& out, const std::string& where) {
  if (node[key]) out = get<T>(node, key, where);
}

template <typename T>
void read_opt(const YAML::Node& node, const std::string& key, std::optional<T>& out, const std::string& where) {
  if (node[key] && !node[key].IsNull()) out = get<T>(node, key, where);
}

template <typename T>
std::vector<T> read_list(const YAML::Node& node, const std::string& key, const std::string& where) {
  const auto n = node[key];
  if (!n.IsSequence() || n.size() == 0) throw ConfigError("'" + key + "' in " + where + " must be a non-empty list");
  std::vector<T> out;
  for (const auto& item : n) {
    try {
      out.push_back(item.as<T>());
    } catch (const YAML::Exception&) {
      throw ConfigError("invalid entry in '" + key + "' of " + where);
    }
  }
  return out;
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

std::string canonical_channels(const std::string& label) {
  try {
    return data::channel_set_label(data::parse_channel_set(label));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

evaluation::Comparison parse_comparison(const std::string& text) {
  const auto pos = text.find(" vs");
  if (pos == std::string::npos) throw ConfigError("comparison '" + text + "' must read '<lhs> vs. <rhs>'");
  std::string rhs = text.substr(pos + 3);
  if (!rhs.empty() && rhs.front() == '.') rhs.erase(0, 1);
  rhs.erase(0, rhs.find_first_not_of(' '));
  return {canonical_channels(text.substr(0, pos)), canonical_channels(rhs), evaluation::Sided::kLess};
}

}  // namespace

std::vector<std::string> ExperimentConfig::fold_labels() const {
  if (!folds.empty()) return folds;
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= fold_policy.folds; ++k) out.push_back(std::to_string(k));
  out.push_back("final");
  return out;
}

void ExperimentConfig::validate(bool check_paths) const {
  if (region_set.empty() || region_set.find_first_of("/_ ") != std::string::npos) {
    throw ConfigError("region_set must be non-empty without '/', '_' or spaces");
  }
  if (data.empty()) throw ConfigError("no data files configured");
  if (!data.count(data::Channel::kIncidence)) throw ConfigError("data must include the incidence channel I");
  for (const auto& set : channel_sets) {
    for (auto c : data::parse_channel_set(set)) {
      if (!data.count(c)) {
        throw ConfigError(std::string("channel set ") + set + " needs data for channel " + data::channel_code(c));
      }
    }
  }
  if (window == 0) throw ConfigError("window must be positive");
  if (std::set<std::uint64_t>(train.seeds.begin(), train.seeds.end()).size() != train.seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  static const std::map<std::size_t, std::set<std::size_t>> kKnownPairs{{12, {3, 6, 12, 24, 36}}, {14, {2, 7, 14}}};
  for (auto f : horizons) {
    if (f == 0) throw ConfigError("horizons must be positive");
    const auto it = kKnownPairs.find(window);
    if (it != kKnownPairs.end() && !it->second.count(f)) {
      throw ConfigError("horizon " + std::to_string(f) + " is not used with window " + std::to_string(window));
    }
  }
  for (const auto& label : fold_labels()) {
    if (label == "final") continue;
    std::size_t k = 0;
    try {
      k = std::stoul(label);
    } catch (const std::exception&) {
      throw ConfigError("fold '" + label + "' is neither a fold number nor 'final'");
    }
    if (k < 1 || k > fold_policy.folds) throw ConfigError("fold " + label + " is out of range");
  }
  if (fold_policy.final_denominator == 0 || fold_policy.final_numerator >= fold_policy.final_denominator) {
    throw ConfigError("final test share must lie in [0, 1)");
  }
  try {
    train.validate();
    model::ModelConfig probe = model;
    probe.window = window;
    probe.horizon = horizons.front();
    probe.channels = 1;
    probe.nodes = 1;
    for (auto v : variants) {
      probe.variant = v;
      probe.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (check_paths) {
    auto need = [](const fs::path& p, const char* what) {
      if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    need(regions, "region table");
    for (const auto& [c, p] : data) need(p, "data file");
    if (analysis.lockdowns) need(*analysis.lockdowns, "lockdown table");
  }
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  check_keys(root, where,
             {"region_set", "regions", "data", "channel_sets", "window", "horizons", "variants", "folds", "seeds",
              "output", "snapshot_range", "fold_policy", "model", "adjacency", "geographic", "train", "analysis",
              "comparisons", "pooled_t_test"});
  const fs::path base = fs::absolute(path).parent_path();

  ExperimentConfig c;
  read(root, "region_set", c.region_set, where);
  if (!root["regions"]) throw ConfigError(where + ": 'regions' is required");
  c.regions = resolve(base, get<std::string>(root, "regions", where));
  if (!root["data"] || !root["data"].IsMap()) throw ConfigError(where + ": 'data' must map channels to files");
  for (const auto& kv : root["data"]) {
    data::Channel ch;
    try {
      ch = data::parse_channel(kv.first.as<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    c.data[ch] = resolve(base, kv.second.as<std::string>());
  }
  if (root["channel_sets"]) {
    c.channel_sets.clear();
    for (const auto& s : read_list<std::string>(root, "channel_sets", where)) {
      c.channel_sets.push_back(canonical_channels(s));
    }
  }
  read(root, "window", c.window, where);
  if (root["horizons"]) c.horizons = read_list<std::size_t>(root, "horizons", where);
  if (root["variants"]) {
    c.variants.clear();
    for (const auto& v : read_list<std::string>(root, "variants", where)) {
      try {
        c.variants.push_back(model::parse_variant(v));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (root["folds"]) c.folds = read_list<std::string>(root, "folds", where);
  if (root["seeds"]) c.train.seeds = read_list<std::uint64_t>(root, "seeds", where);
  if (root["output"]) c.output = resolve(base, get<std::string>(root, "output", where));
  else c.output = base / c.output;
  if (root["snapshot_range"]) {
    const auto r = get<std::string>(root, "snapshot_range", where);
    if (r == "test") c.snapshot_range = SnapshotRange::kTest;
    else if (r == "all") c.snapshot_range = SnapshotRange::kAll;
    else throw ConfigError("snapshot_range must be 'test' or 'all'");
  }

  if (const auto n = root["fold_policy"]) {
    const std::string w = where + ":fold_policy";
    check_keys(n, w, {"folds", "final_numerator", "final_denominator", "min_samples"});
    read(n, "folds", c.fold_policy.folds, w);
    read(n, "final_numerator", c.fold_policy.final_numerator, w);
    read(n, "final_denominator", c.fold_policy.final_denominator, w);
    read(n, "min_samples", c.fold_policy.min_samples, w);
  }
  if (const auto n = root["model"]) {
    const std::string w = where + ":model";
    check_keys(n, w, {"d_model", "heads", "layers", "hops", "ffn_dim"});
    read(n, "d_model", c.model.d_model, w);
    read(n, "heads", c.model.heads, w);
    read(n, "layers", c.model.layers, w);
    read(n, "hops", c.model.hops, w);
    read(n, "ffn_dim", c.model.ffn_dim, w);
  }
  if (const auto n = root["adjacency"]) {
    const std::string w = where + ":adjacency";
    check_keys(n, w, {"set_diag", "undirected", "truncate", "threshold", "symmetrize", "rho_default", "rho_source"});
    auto& o = c.model.generated_options;
    read(n, "set_diag", o.set_diag, w);
    read(n, "undirected", o.undirected, w);
    read(n, "truncate", o.truncate, w);
    read_opt(n, "threshold", o.threshold, w);
    if (n["symmetrize"]) {
      const auto s = get<std::string>(n, "symmetrize", w);
      if (s == "max") o.symmetrize = graph::Symmetrize::kMax;
      else if (s == "mean") o.symmetrize = graph::Symmetrize::kMean;
      else throw ConfigError("symmetrize must be 'max' or 'mean'");
    }
    read(n, "rho_default", c.model.sparsity.rho_default, w);
    if (n["rho_source"]) {
      const auto s = get<std::string>(n, "rho_source", w);
      if (s == "geographic") c.model.sparsity.rho_source = graph::RhoSource::kGeographic;
      else if (s == "attention") c.model.sparsity.rho_source = graph::RhoSource::kLiteralAttention;
      else throw ConfigError("rho_source must be 'geographic' or 'attention'");
    }
  }
  if (const auto n = root["geographic"]) {
    const std::string w = where + ":geographic";
    check_keys(n, w, {"sigma", "kappa"});
    read_opt(n, "sigma", c.geo_sigma, w);
    read_opt(n, "kappa", c.geo_kappa, w);
  }
  if (const auto n = root["train"]) {
    const std::string w = where + ":train";
    check_keys(n, w,
               {"peak_lr", "warmup_steps", "max_steps", "batch_size", "patience", "loss", "eval_every", "standardize",
                "beta1", "beta2", "epsilon"});
    auto& t = c.train;
    read(n, "peak_lr", t.peak_lr, w);
    read(n, "warmup_steps", t.warmup_steps, w);
    read(n, "max_steps", t.max_steps, w);
    read(n, "batch_size", t.batch_size, w);
    read(n, "patience", t.patience, w);
    read(n, "eval_every", t.eval_every, w);
    read(n, "standardize", t.standardize, w);
    read(n, "beta1", t.beta1, w);
    read(n, "beta2", t.beta2, w);
    read(n, "epsilon", t.epsilon, w);
    if (n["loss"]) {
      try {
        t.loss_kind = training::parse_loss_kind(get<std::string>(n, "loss", w));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (const auto n = root["analysis"]) {
    const std::string w = where + ":analysis";
    check_keys(n, w, {"variant", "horizon", "fold", "channels", "block", "lockdowns", "pre_days", "post_days",
                      "connectivity"});
    auto& a = c.analysis;
    if (n["variant"]) {
      try {
        a.variant = model::parse_variant(get<std::string>(n, "variant", w));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    read_opt(n, "horizon", a.horizon, w);
    read(n, "fold", a.fold, w);
    std::optional<std::string> ch;
    read_opt(n, "channels", ch, w);
    if (ch) a.channels = canonical_channels(*ch);
    read_opt(n, "block", a.block, w);
    std::optional<std::string> lockdowns;
    read_opt(n, "lockdowns", lockdowns, w);
    if (lockdowns) a.lockdowns = resolve(base, *lockdowns);
    read(n, "pre_days", a.indicator.pre_days, w);
    read(n, "post_days", a.indicator.post_days, w);
    if (n["connectivity"]) {
      const auto s = get<std::string>(n, "connectivity", w);
      if (s == "row_and_column") a.connectivity = analysis::Connectivity::kRowAndColumn;
      else if (s == "row") a.connectivity = analysis::Connectivity::kRowOnly;
      else throw ConfigError("connectivity must be 'row_and_column' or 'row'");
    }
  }
  if (root["comparisons"]) {
    for (const auto& s : read_list<std::string>(root, "comparisons", where)) c.comparisons.push_back(parse_comparison(s));
  }
  read(root, "pooled_t_test", c.pooled_t_test, where);

  if (const char* env = std::getenv("SPATIO_OUT"); env && *env) c.output = fs::absolute(env);
  try {
    c.model.generated_options.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("invalid seed '" + item + "' in --seed-list");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ConfigError("--seed-list is empty");
  return seeds;
}

nlohmann::json semantic_json(const ExperimentConfig& c) {
  using nlohmann::json;
  const auto& o = c.model.generated_options;
  json j;
  j["window"] = c.window;
  j["fold_policy"] = {{"folds", c.fold_policy.folds},
                      {"final_numerator", c.fold_policy.final_numerator},
                      {"final_denominator", c.fold_policy.final_denominator},
                      {"train_parts", c.fold_policy.train_parts},
                      {"val_parts", c.fold_policy.val_parts},
                      {"test_parts", c.fold_policy.test_parts},
                      {"min_samples", c.fold_policy.min_samples}};
  j["model"] = {{"d_model", c.model.d_model},
                {"heads", c.model.heads},
                {"layers", c.model.layers},
                {"hops", c.model.hops},
                {"ffn_dim", c.model.ffn_dim}};
  j["adjacency"] = {{"set_diag", o.set_diag},
                    {"undirected", o.undirected},
                    {"truncate", o.truncate},
                    {"threshold", o.threshold ? json(*o.threshold) : json(nullptr)},
                    {"symmetrize", o.symmetrize == graph::Symmetrize::kMax ? "max" : "mean"},
                    {"rho_default", c.model.sparsity.rho_default},
                    {"rho_source",
                     c.model.sparsity.rho_source == graph::RhoSource::kGeographic ? "geographic" : "attention"}};
  j["geographic"] = {{"sigma", c.geo_sigma ? json(*c.geo_sigma) : json(nullptr)},
                     {"kappa", c.geo_kappa ? json(*c.geo_kappa) : json(nullptr)}};
  const auto& t = c.train;
  j["train"] = {{"peak_lr", t.peak_lr},         {"warmup_steps", t.warmup_steps},
                {"max_steps", t.max_steps},     {"batch_size", t.batch_size},
                {"patience", t.patience},       {"loss", training::loss_kind_name(t.loss_kind)},
                {"eval_every", t.eval_every},   {"standardize", t.standardize},
                {"beta1", t.beta1},             {"beta2", t.beta2},
                {"epsilon", t.epsilon}};
  j["snapshot_range"] = c.snapshot_range == SnapshotRange::kTest ? "test" : "all";
  return j;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace spatio::cli
