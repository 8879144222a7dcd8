#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spatio/model/config.hpp"
#include "spatio/numcore/gradcheck.hpp"
#include "spatio/numcore/tensor.hpp"

namespace spatio::model {

using numcore::NamedTensor;
using numcore::Tensor;

/// Named learnable tensors in a fixed, config-determined order.
class ModelParams {
 public:
  void add(std::string name, Tensor tensor);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& operator[](const std::string& name) const;
  Tensor& operator[](const std::string& name);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  std::size_t scalar_count() const;

  /// Independent copy of every tensor.
  ModelParams clone() const;
  /// FNV-1a over names, shapes and value bytes.
  std::uint64_t fingerprint() const;
  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
/// every linear map and bias; layer-norm scales start at 1 and shifts at 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

std::size_t parameter_count(const ModelConfig& config);

/// Writes `params.bin` (versioned little-endian binary) and `manifest.json`
/// (tensor names and shapes) into `dir`.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace spatio::model
