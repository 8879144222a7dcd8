#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "spatio/graph/adjacency.hpp"

namespace spatio::model {

enum class Variant { kTrans, kTransGcn, kTransAdp, kTransGcnAdp, kDLinear };

/// "Trans", "Trans+GCN", "Trans+Adp", "Trans+GCN+Adp", "DLinear".
std::string variant_name(Variant variant);
/// Accepts the display names above and the compact forms ("TransGCN", ...).
Variant parse_variant(std::string_view name);

/// Variant consumes the geographic adjacency.
bool uses_geographic(Variant variant);
/// Variant generates adjacency matrices from spatial attention.
bool uses_generated(Variant variant);
bool is_transformer(Variant variant);

struct ModelConfig {
  Variant variant = Variant::kTrans;
  std::size_t nodes = 1;
  std::size_t window = 12;
  std::size_t horizon = 3;
  std::size_t channels = 1;
  std::size_t d_model = 16;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t hops = 2;
  /// Feed-forward hidden width of the plain transformer block; 0 means 2 * D.
  std::size_t ffn_dim = 0;
  graph::AdjacencyOptions generated_options{};
  graph::SparsityPolicy sparsity{};

  std::size_t d_k() const { return d_model / heads; }
  std::size_t output_dim() const { return channels; }
  std::size_t ffn_width() const { return ffn_dim ? ffn_dim : 2 * d_model; }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

}  // namespace spatio::model
