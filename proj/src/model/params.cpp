#include "spatio/model/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace spatio::model {

namespace {

enum class Init { kUniform, kOnes, kZeros };

struct Slot {
  std::string name;
  numcore::Shape shape;
  Init init;
  std::size_t fan_in;
};

std::vector<Slot> layout(const ModelConfig& c) {
  c.validate();
  std::vector<Slot> s;
  auto weight = [&](std::string name, numcore::Shape shape, std::size_t fan_in) {
    s.push_back({std::move(name), std::move(shape), Init::kUniform, fan_in});
  };
  if (c.variant == Variant::kDLinear) {
    const std::size_t series = c.nodes * c.channels;
    weight("dlinear.weight", {series, c.window, c.horizon}, c.window);
    weight("dlinear.bias", {series, 1, c.horizon}, c.window);
    return s;
  }
  const std::size_t d = c.d_model;
  weight("embed.weight", {c.channels, d}, c.channels);
  weight("embed.bias", {d}, c.channels);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    weight(p + "attn.wq", {d, d}, d);
    weight(p + "attn.bq", {d}, d);
    weight(p + "attn.wk", {d, d}, d);
    weight(p + "attn.wv", {d, d}, d);
    weight(p + "attn.bv", {d}, d);
    weight(p + "attn.wo", {d, d}, d);
    weight(p + "attn.bo", {d}, d);
    s.push_back({p + "norm1.gamma", {d}, Init::kOnes, 0});
    s.push_back({p + "norm1.beta", {d}, Init::kZeros, 0});
    if (c.variant == Variant::kTrans) {
      const std::size_t h = c.ffn_width();
      weight(p + "ffn.w1", {d, h}, d);
      weight(p + "ffn.b1", {h}, d);
      weight(p + "ffn.w2", {h, d}, h);
      weight(p + "ffn.b2", {d}, h);
      s.push_back({p + "norm2.gamma", {d}, Init::kOnes, 0});
      s.push_back({p + "norm2.beta", {d}, Init::kZeros, 0});
      continue;
    }
    std::size_t streams = 0;
    if (uses_geographic(c.variant)) {
      ++streams;
      for (std::size_t k = 0; k <= c.hops; ++k) weight(p + "gcn_geo.theta" + std::to_string(k), {d, d}, d);
    }
    if (uses_generated(c.variant)) {
      ++streams;
      weight(p + "spatial.wq", {c.window * d, c.d_k()}, c.window * d);
      weight(p + "spatial.wk", {c.window * d, c.d_k()}, c.window * d);
      for (std::size_t k = 0; k <= c.hops; ++k) weight(p + "gcn_adp.theta" + std::to_string(k), {d, d}, d);
    }
    weight(p + "fuse.wx", {streams * d, d}, streams * d);
  }
  weight("decoder.wo", {c.window, c.horizon}, c.window);
  weight("generator.wg", {d, c.output_dim()}, d);
  weight("generator.bg", {c.output_dim()}, d);
  return s;
}

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void ModelParams::add(std::string name, Tensor tensor) {
  if (!index_.emplace(name, entries_.size()).second) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor& ModelParams::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[it->second].tensor;
}

Tensor& ModelParams::operator[](const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[it->second].tensor;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& e : entries_) out.add(e.name, e.tensor.clone());
  return out;
}

std::uint64_t ModelParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e.name.data(), e.name.size());
    for (auto extent : e.tensor.shape()) mix(&extent, sizeof extent);
    const auto v = e.tensor.values();
    mix(v.data(), v.size() * sizeof(double));
  }
  return h;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (const auto& slot : layout(config)) {
    const std::size_t n = numcore::shape_size(slot.shape);
    std::vector<double> v(n);
    switch (slot.init) {
      case Init::kOnes: std::fill(v.begin(), v.end(), 1.0); break;
      case Init::kZeros: std::fill(v.begin(), v.end(), 0.0); break;
      case Init::kUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : v) x = dist(rng);
        break;
      }
    }
    params.add(slot.name, Tensor(slot.shape, std::move(v), true));
  }
  return params;
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& slot : layout(config)) n += numcore::shape_size(slot.shape);
  return n;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint in " + dir.string());
  bin.write(kMagic, sizeof kMagic);
  write_pod(bin, kVersion);
  write_pod(bin, static_cast<std::uint64_t>(params.entries().size()));
  nlohmann::json manifest;
  manifest["format"] = "spatio-checkpoint";
  manifest["version"] = kVersion;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    write_pod(bin, static_cast<std::uint32_t>(e.name.size()));
    bin.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod(bin, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto extent : e.tensor.shape()) write_pod(bin, static_cast<std::uint64_t>(extent));
    const auto v = e.tensor.values();
    bin.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    manifest["tensors"].push_back({{"name", e.name}, {"shape", e.tensor.shape()}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read checkpoint in " + dir.string());
  char magic[4];
  bin.read(magic, sizeof magic);
  if (!bin || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(dir.string() + ": not a checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(bin);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_pod<std::uint64_t>(bin);
  ModelParams params;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(read_pod<std::uint32_t>(bin), '\0');
    bin.read(name.data(), static_cast<std::streamsize>(name.size()));
    numcore::Shape shape(read_pod<std::uint32_t>(bin));
    for (auto& extent : shape) extent = static_cast<std::size_t>(read_pod<std::uint64_t>(bin));
    std::vector<double> v(numcore::shape_size(shape));
    bin.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("truncated checkpoint tensor '" + name + "'");
    params.add(std::move(name), Tensor(std::move(shape), std::move(v), true));
  }
  return params;
}

}  // namespace spatio::model
