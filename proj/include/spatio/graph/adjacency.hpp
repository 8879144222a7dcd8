#pragma once

// Spatial weight matrices: the static distance-kernel adjacency, the dynamic
// adjacency generated from node attention, propagation normalization and the
// mobility indicator.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "spatio/data/panel.hpp"
#include "spatio/numcore/tensor.hpp"

namespace spatio::graph {

using numcore::Tensor;

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in km between two (lat, lon) points given in degrees.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

/// Symmetric N x N great-circle distances with a zero diagonal.
Tensor haversine_matrix(const data::RegionTable& regions);

/// Population standard deviation and mean of the off-diagonal distances.
double pairwise_distance_std(const Tensor& dist);
double pairwise_distance_mean(const Tensor& dist);

struct GeoAdjacency {
  Tensor weights;  // N x N, zero diagonal
  double sigma = 0.0;
  double kappa = 0.0;
};

/// W_ij = exp(-d_ij^2 / sigma^2) for d_ij <= kappa, else 0; no self-loops.
/// Throws std::invalid_argument when sigma <= 0.
GeoAdjacency gaussian_kernel_adjacency(const Tensor& dist, double sigma, double kappa);
/// sigma = std of pairwise distances, kappa = their mean.
GeoAdjacency gaussian_kernel_adjacency(const Tensor& dist);

enum class Symmetrize {
  kMax,   // max(A, A^T): keeps surviving weights verbatim
  kMean,  // (A + A^T) / 2
};

struct AdjacencyOptions {
  bool set_diag = true;
  bool undirected = true;
  bool truncate = true;
  /// Truncation threshold; 1/N when unset.
  std::optional<double> threshold;
  Symmetrize symmetrize = Symmetrize::kMax;

  /// Throws std::invalid_argument if the threshold lies outside [0, 1].
  void validate() const;
};

/// How the target sparsity ratio is chosen when a geographic matrix exists.
enum class RhoSource {
  kGeographic,        // non-zero share of A_g
  kLiteralAttention,  // non-zero share of M_n, as the pseudocode line reads
};

struct SparsityPolicy {
  double rho_default = 0.001;
  RhoSource rho_source = RhoSource::kGeographic;
};

struct GeneratedAdjacency {
  Tensor weights;  // N x N
  double tau = 0.0;
  double rho = 0.0;
  /// True when the thresholded candidate was kept.
  bool truncated = false;
};

/// Row-stochastic node attention softmax(Q_n K_n^T / sqrt(D_k)), where
/// Q_n = flat(Z) W_q and K_n = flat(Z) W_k with Z (N x T x D) flattened to
/// N x (T*D).
Tensor spatial_attention(const Tensor& z, const Tensor& wq, const Tensor& wk);

/// Zeroes entries strictly below tau and keeps the rest verbatim.
Tensor hard_threshold(const Tensor& m, double tau);

/// Fraction of strictly positive entries.
double nonzero_ratio(const Tensor& a);

/// Sparsifies a node attention matrix: threshold at tau, keep the truncated
/// candidate only while its non-zero ratio exceeds rho, then apply the
/// symmetrization and self-loop options. A single node always yields [[1]].
GeneratedAdjacency sparsify(const Tensor& m, const Tensor* geographic,
                            const AdjacencyOptions& options = {},
                            const SparsityPolicy& policy = {});

/// Symmetrization and diagonal options on their own.
Tensor apply_options(const Tensor& a, const AdjacencyOptions& options);

/// D^{-1/2} A D^{-1/2} with D the row sums; zero-degree rows stay zero.
Tensor normalize_sym(const Tensor& a);

/// Share of strictly positive entries of a square matrix.
double mobility_indicator(const Tensor& a);

struct AdjacencySnapshot {
  Tensor weights;
  std::size_t block = 0;
  std::string sample_start;
};

/// CSV with a `# N=<n> block=<l> sample_start=<date>` header line followed by
/// N rows of N values printed with round-trip precision.
void write_snapshot(const AdjacencySnapshot& snapshot, const std::filesystem::path& path);
AdjacencySnapshot read_snapshot(const std::filesystem::path& path);

}  // namespace spatio::graph
