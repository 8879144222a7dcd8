#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "spatio/graph/adjacency.hpp"
#include "spatio/numcore/gradcheck.hpp"
#include "spatio/numcore/ops.hpp"
#include "test_util.hpp"

namespace graph = spatio::graph;
namespace nc = spatio::numcore;
using nc::Tensor;
using spatio::testing::random_tensor;
using spatio::testing::TempDir;

namespace {

Tensor random_row_stochastic(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += v[i * n + j] = dist(rng);
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] /= row;
  }
  return Tensor({n, n}, std::move(v));
}

graph::AdjacencyOptions bare_options() {
  graph::AdjacencyOptions o;
  o.undirected = false;
  o.set_diag = false;
  return o;
}

}  // namespace

TEST(Haversine, ReferenceDistances) {
  EXPECT_DOUBLE_EQ(graph::haversine_km(12.5, 7.0, 12.5, 7.0), 0.0);
  EXPECT_NEAR(graph::haversine_km(0, 0, 0, 180), std::numbers::pi * 6371.0, 1e-9);
  // One degree of arc along the equator, evaluated directly.
  const double one_degree = 6371.0 * std::numbers::pi / 180.0;
  EXPECT_NEAR(graph::haversine_km(0, 0, 0, 1), one_degree, 1e-9);
  EXPECT_NEAR(one_degree, 111.19, 0.005);
}

TEST(Haversine, MatrixIsSymmetricWithZeroDiagonal) {
  const spatio::data::RegionTable regions(
      {{"A", 48.85, 2.35, 1}, {"B", 52.52, 13.40, 1}, {"C", 41.90, 12.50, 1}});
  const Tensor d = graph::haversine_matrix(regions);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(d.at(i, i), 0.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(d.at(i, j), d.at(j, i));
  }
  EXPECT_NEAR(d.at(0, 1), 877.5, 2.0);  // Paris-Berlin
}

TEST(GaussianKernel, ClosedFormWeights) {
  const Tensor dist = Tensor::matrix({{0, 0, 10, 50}, {0, 0, 20, 5}, {10, 20, 0, 1}, {50, 5, 1, 0}});
  const auto geo = graph::gaussian_kernel_adjacency(dist, 10.0, 30.0);
  EXPECT_DOUBLE_EQ(geo.weights.at(0, 1), 1.0);               // zero distance off the diagonal
  EXPECT_NEAR(geo.weights.at(0, 2), std::exp(-1.0), 1e-15);  // dist = sigma
  EXPECT_NEAR(geo.weights.at(0, 2), 0.367879, 1e-6);
  EXPECT_EQ(geo.weights.at(0, 3), 0.0);  // beyond kappa
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(geo.weights.at(i, i), 0.0);
  EXPECT_THROW(graph::gaussian_kernel_adjacency(dist, 0.0, 30.0), std::invalid_argument);
}

TEST(GaussianKernel, MonotoneInDistance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    double a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    const Tensor d = Tensor::matrix({{0, a, b}, {a, 0, 1}, {b, 1, 0}});
    const auto geo = graph::gaussian_kernel_adjacency(d, 40.0, 100.0);
    EXPECT_GT(geo.weights.at(0, 1), geo.weights.at(0, 2));
  }
}

TEST(GaussianKernel, DefaultsUsePairwiseStatistics) {
  const Tensor d = Tensor::matrix({{0, 3, 5}, {3, 0, 4}, {5, 4, 0}});
  const double mean = 4.0;
  const double sd = std::sqrt((1.0 + 0.0 + 1.0) / 3.0);
  EXPECT_NEAR(graph::pairwise_distance_mean(d), mean, 1e-12);
  EXPECT_NEAR(graph::pairwise_distance_std(d), sd, 1e-12);
  const auto geo = graph::gaussian_kernel_adjacency(d);
  EXPECT_NEAR(geo.sigma, sd, 1e-12);
  EXPECT_NEAR(geo.kappa, mean, 1e-12);
  EXPECT_EQ(geo.weights.at(0, 2), 0.0);
}

TEST(SpatialAttention, UniformForZeroInputAndSingleNode) {
  std::mt19937_64 rng(8);
  const Tensor wq = random_tensor({3 * 4, 2}, rng);
  const Tensor wk = random_tensor({3 * 4, 2}, rng);
  const Tensor m = graph::spatial_attention(Tensor::zeros({5, 3, 4}), wq, wk);
  for (double v : m.values()) EXPECT_DOUBLE_EQ(v, 0.2);
  const Tensor single = graph::spatial_attention(random_tensor({1, 3, 4}, rng), wq, wk);
  EXPECT_EQ(single.to_vector(), std::vector<double>{1.0});
}

TEST(SpatialAttention, RowsSumToOneAndMatchLoopOracle) {
  std::mt19937_64 rng(9);
  const std::size_t n = 4, t = 3, d = 4, dk = 2;
  const Tensor z = random_tensor({n, t, d}, rng);
  const Tensor wq = random_tensor({t * d, dk}, rng);
  const Tensor wk = random_tensor({t * d, dk}, rng);
  const Tensor m = graph::spatial_attention(z, wq, wk);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> q(dk, 0.0), s(n, 0.0);
    for (std::size_t f = 0; f < t * d; ++f)
      for (std::size_t c = 0; c < dk; ++c) q[c] += z[i * t * d + f] * wq[f * dk + c];
    double mx = -1e300, total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> k(dk, 0.0);
      for (std::size_t f = 0; f < t * d; ++f)
        for (std::size_t c = 0; c < dk; ++c) k[c] += z[j * t * d + f] * wk[f * dk + c];
      for (std::size_t c = 0; c < dk; ++c) s[j] += q[c] * k[c];
      s[j] /= std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, s[j]);
    }
    for (auto& v : s) total += v = std::exp(v - mx);
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(m.at(i, j), s[j] / total, 1e-14);
      row += m.at(i, j);
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

TEST(HardThreshold, Cases) {
  const Tensor uniform = Tensor::full({28, 28}, 1.0 / 28.0);
  const double tau = 1.0 / 28.0;
  EXPECT_NEAR(tau, 0.0357, 5e-5);
  EXPECT_EQ(graph::hard_threshold(uniform, tau).to_vector(), uniform.to_vector());
  EXPECT_EQ(graph::mobility_indicator(graph::hard_threshold(uniform, 0.5)), 0.0);
  const Tensor m = Tensor::matrix({{0.6, 0.4}, {0.01, 0.99}});
  EXPECT_EQ(graph::hard_threshold(m, 0.05).to_vector(), (std::vector<double>{0.6, 0.4, 0.0, 0.99}));
}

TEST(HardThreshold, IdempotentAndMonotoneInTau) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> tau_dist(0.0, 0.6);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor m = random_row_stochastic(5, rng);
    double t1 = tau_dist(rng), t2 = tau_dist(rng);
    if (t1 > t2) std::swap(t1, t2);
    const Tensor once = graph::hard_threshold(m, t1);
    EXPECT_EQ(graph::hard_threshold(once, t1).to_vector(), once.to_vector());
    EXPECT_LE(graph::mobility_indicator(graph::hard_threshold(m, t2)),
              graph::mobility_indicator(graph::hard_threshold(m, t1)));
  }
}

TEST(Sparsify, UniformThreeNodesWithDenseGeography) {
  const Tensor m = Tensor::full({3, 3}, 1.0 / 3.0);
  const Tensor geo = Tensor::matrix({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  const auto out = graph::sparsify(m, &geo, bare_options());
  EXPECT_DOUBLE_EQ(out.rho, 6.0 / 9.0);
  EXPECT_DOUBLE_EQ(out.tau, 1.0 / 3.0);
  EXPECT_TRUE(out.truncated);
  EXPECT_EQ(out.weights.to_vector(), m.to_vector());
}

TEST(Sparsify, BranchSelectionWithoutGeography) {
  // Diagonal-dominant rows: only the diagonal survives tau = 1/3, r = 3/9 > 0.001.
  const Tensor m = Tensor::matrix({{0.8, 0.1, 0.1}, {0.05, 0.9, 0.05}, {0.2, 0.1, 0.7}});
  const auto kept = graph::sparsify(m, nullptr, bare_options());
  EXPECT_TRUE(kept.truncated);
  EXPECT_DOUBLE_EQ(kept.rho, 0.001);
  EXPECT_EQ(kept.weights.to_vector(), (std::vector<double>{0.8, 0, 0, 0, 0.9, 0, 0, 0, 0.7}));
  // A threshold above every entry empties the candidate: r = 0 fails, M_n is returned.
  auto high = bare_options();
  high.threshold = 0.95;
  const auto fallback = graph::sparsify(m, nullptr, high);
  EXPECT_FALSE(fallback.truncated);
  EXPECT_EQ(fallback.weights.to_vector(), m.to_vector());
}

TEST(Sparsify, LiteralRhoSourceUsesAttentionDensity) {
  const Tensor m = Tensor::matrix({{0.8, 0.1, 0.1}, {0.05, 0.9, 0.05}, {0.2, 0.1, 0.7}});
  const Tensor geo = Tensor::matrix({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
  graph::SparsityPolicy literal;
  literal.rho_source = graph::RhoSource::kLiteralAttention;
  const auto out = graph::sparsify(m, &geo, bare_options(), literal);
  EXPECT_DOUBLE_EQ(out.rho, 1.0);  // M_n is fully dense
  EXPECT_FALSE(out.truncated);
  EXPECT_DOUBLE_EQ(graph::sparsify(m, &geo, bare_options()).rho, 2.0 / 9.0);
}

TEST(Sparsify, SingleNodeIsAlwaysOne) {
  graph::AdjacencyOptions none = bare_options();
  none.truncate = false;
  for (const auto& opts : {graph::AdjacencyOptions{}, none}) {
    EXPECT_EQ(graph::sparsify(Tensor::matrix({{1.0}}), nullptr, opts).weights.to_vector(),
              std::vector<double>{1.0});
  }
}

TEST(Sparsify, DefaultOptionsGiveSymmetricSelfLoopedTruncatedMatrix) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const Tensor m = random_row_stochastic(n, rng);
    const auto out = graph::sparsify(m, nullptr);
    const Tensor& a = out.weights;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(a.at(i, i), 1.0);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(a.at(i, j), a.at(j, i));
        if (out.truncated && i != j) {
          EXPECT_TRUE(a.at(i, j) == 0.0 || a.at(i, j) >= out.tau);
        }
      }
    }
    EXPECT_GE(graph::mobility_indicator(a), 1.0 / static_cast<double>(n));
  }
}

TEST(Sparsify, MeanSymmetrizationIsAvailable) {
  graph::AdjacencyOptions opts;
  opts.symmetrize = graph::Symmetrize::kMean;
  opts.set_diag = false;
  opts.truncate = false;
  const Tensor m = Tensor::matrix({{0.5, 0.5}, {0.1, 0.9}});
  EXPECT_EQ(graph::apply_options(m, opts).to_vector(), (std::vector<double>{0.5, 0.3, 0.3, 0.9}));
}

TEST(AdjacencyOptions, ThresholdRangeIsValidated) {
  graph::AdjacencyOptions opts;
  opts.threshold = 1.5;
  EXPECT_THROW(opts.validate(), std::invalid_argument);
  opts.threshold = -0.1;
  EXPECT_THROW(opts.validate(), std::invalid_argument);
}

TEST(NormalizeSym, ClosedFormCases) {
  EXPECT_EQ(graph::normalize_sym(Tensor::identity(3)).to_vector(), Tensor::identity(3).to_vector());
  const Tensor swap = Tensor::matrix({{0, 1}, {1, 0}});
  EXPECT_EQ(graph::normalize_sym(swap).to_vector(), swap.to_vector());
  const Tensor isolated = Tensor::matrix({{1, 1, 0}, {1, 1, 0}, {0, 0, 0}});
  const Tensor out = graph::normalize_sym(isolated);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.at(2, j), 0.0);
  EXPECT_DOUBLE_EQ(out.at(0, 1), 0.5);
}

TEST(NormalizeSym, SpectralRadiusAtMostOne) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = i; j < 5; ++j) a(i, j) = a(j, i) = dist(rng) < 0.4 ? 0.0 : dist(rng);
    for (int i = 0; i < 5; ++i) a(i, i) = 1.0;
    std::vector<double> flat(25);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) flat[i * 5 + j] = a(i, j);
    const Tensor out = graph::normalize_sym(Tensor({5, 5}, flat));
    Eigen::MatrixXd n(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        n(i, j) = out.at(i, j);
        EXPECT_NEAR(out.at(i, j), out.at(j, i), 1e-15);
      }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(n);
    EXPECT_LE(solver.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(NormalizeSym, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor({4, 4}, rng, 0.1, 1.0, true);
    const Tensor w = random_tensor({4, 4}, rng);
    const auto report = nc::finite_difference_check(
        [&] { return nc::sum(nc::mul(graph::normalize_sym(a), w)); }, {{"a", a}});
    EXPECT_LT(report.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(MobilityIndicator, Cases) {
  EXPECT_EQ(graph::mobility_indicator(Tensor::zeros({3, 3})), 0.0);
  EXPECT_EQ(graph::mobility_indicator(Tensor::identity(4)), 0.25);
  EXPECT_DOUBLE_EQ(graph::mobility_indicator(Tensor::matrix({{1, 0, 2}, {0, 0, 0}, {0.5, 0, 3}})), 4.0 / 9.0);
  EXPECT_EQ(graph::mobility_indicator(Tensor::matrix({{-1, 0}, {0, 0}})), 0.0);
}

TEST(Snapshot, RoundTripsBitExactly) {
  TempDir dir("snap");
  std::mt19937_64 rng(3);
  const graph::AdjacencySnapshot snap{random_tensor({4, 4}, rng, 0.0, 1.0), 1, "2021-05-03"};
  graph::write_snapshot(snap, dir / "a.csv");
  const auto back = graph::read_snapshot(dir / "a.csv");
  EXPECT_EQ(back.weights.to_vector(), snap.weights.to_vector());
  EXPECT_EQ(back.block, 1u);
  EXPECT_EQ(back.sample_start, "2021-05-03");
}
