#pragma once

// Forward passes of the transformer variants and the per-site linear baseline.
//
// Every transformer block computes Z_t = Z + LN(MHA(Z)). The plain
// transformer then applies Z' = Z_t + LN(FFN(Z_t)); graph variants replace the
// feed-forward path with K-hop propagation over the geographic and/or generated
// adjacency, fused by W_x, and update Z' = ReLU(h) + Z_t. The decoder projects
// the last block along time (W_o, T -> F) and then along features (W_g).

#include <optional>
#include <string>
#include <vector>

#include "spatio/graph/adjacency.hpp"
#include "spatio/model/config.hpp"
#include "spatio/model/params.hpp"

namespace spatio::model {

/// Sinusoidal encoding P[i, 2j] = sin(i / 10000^(2j/D)),
/// P[i, 2j+1] = cos(i / 10000^(2j/D)). Throws for odd D.
Tensor positional_encoding(std::size_t steps, std::size_t d_model);

struct AttentionWeights {
  Tensor wq, bq, wk, wv, bv, wo, bo;
};

AttentionWeights attention_weights(const ModelParams& params, const std::string& prefix);

/// Multi-head scaled dot-product attention along the time axis of an
/// N x T x D block. Heads are concatenated and projected back to D. When
/// `scores` is given it receives each head's N x T x T attention weights.
Tensor temporal_attention(const Tensor& z, const AttentionWeights& w, std::size_t heads,
                          std::vector<Tensor>* scores = nullptr);

/// sum_k A^k Z_t Theta_k with A applied along the node axis.
Tensor gcn_propagate(const Tensor& normalized_adjacency, const Tensor& z_t,
                     const std::vector<Tensor>& thetas);

/// W_x applied to the concatenation of the available streams.
Tensor dual_fuse(const std::optional<Tensor>& h_geo, const std::optional<Tensor>& h_adp,
                 const Tensor& wx);

/// ReLU(h) + Z_t.
Tensor block_update(const Tensor& h, const Tensor& z_t);

struct ForwardOptions {
  /// Replaces every generated adjacency with this matrix (tests, ablations).
  std::optional<Tensor> generated_override;
};

struct ForwardResult {
  Tensor prediction;  // N x F x D_o (DLinear: N x F x 1)
  /// One generated adjacency per block for Adp variants.
  std::vector<graph::GeneratedAdjacency> generated;
};

/// Runs one sample X (N x T x C). `geographic` holds the raw A_g weights and
/// is required by the GCN variants; the plain transformer ignores it.
ForwardResult forward(const ModelConfig& config, const ModelParams& params, const Tensor& x,
                      const Tensor* geographic = nullptr, const ForwardOptions& options = {});

/// Per-site, per-channel T -> F linear maps averaged over channels: N x F x 1.
Tensor dlinear_forward(const ModelConfig& config, const ModelParams& params, const Tensor& x);

}  // namespace spatio::model
