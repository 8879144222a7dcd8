#include "spatio/graph/adjacency.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "spatio/numcore/ops.hpp"
#include "spatio/util/csv.hpp"

namespace spatio::graph {

namespace nc = numcore;

namespace {

std::size_t square_extent(const Tensor& a, const char* op) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw nc::ShapeError(std::string(op) + " needs a square matrix, got " + nc::shape_string(a.shape()));
  }
  return a.dim(0);
}

template <class Fn>
void over_off_diagonal(const Tensor& dist, Fn fn) {
  const std::size_t n = square_extent(dist, "pairwise distance statistics");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) fn(dist.at(i, j));
}

}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double to_rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * to_rad;
  const double dlon = (lon2 - lon1) * to_rad;
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(lat1 * to_rad) * std::cos(lat2 * to_rad) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

Tensor haversine_matrix(const data::RegionTable& regions) {
  const std::size_t n = regions.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double km = haversine_km(regions[i].latitude, regions[i].longitude,
                                     regions[j].latitude, regions[j].longitude);
      d[i * n + j] = km;
      d[j * n + i] = km;
    }
  }
  return Tensor({n, n}, std::move(d));
}

double pairwise_distance_mean(const Tensor& dist) {
  double total = 0.0;
  std::size_t count = 0;
  over_off_diagonal(dist, [&](double v) {
    total += v;
    ++count;
  });
  return count ? total / static_cast<double>(count) : 0.0;
}

double pairwise_distance_std(const Tensor& dist) {
  const double mu = pairwise_distance_mean(dist);
  double acc = 0.0;
  std::size_t count = 0;
  over_off_diagonal(dist, [&](double v) {
    acc += (v - mu) * (v - mu);
    ++count;
  });
  return count ? std::sqrt(acc / static_cast<double>(count)) : 0.0;
}

GeoAdjacency gaussian_kernel_adjacency(const Tensor& dist, double sigma, double kappa) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel needs sigma > 0");
  const std::size_t n = square_extent(dist, "gaussian_kernel_adjacency");
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = dist.at(i, j);
      if (d <= kappa) w[i * n + j] = std::exp(-(d * d) / (sigma * sigma));
    }
  }
  return {Tensor({n, n}, std::move(w)), sigma, kappa};
}

GeoAdjacency gaussian_kernel_adjacency(const Tensor& dist) {
  return gaussian_kernel_adjacency(dist, pairwise_distance_std(dist), pairwise_distance_mean(dist));
}

void AdjacencyOptions::validate() const {
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    throw std::invalid_argument("adjacency threshold must lie in [0, 1]");
  }
}

Tensor spatial_attention(const Tensor& z, const Tensor& wq, const Tensor& wk) {
  if (z.rank() != 3) throw nc::ShapeError("spatial_attention expects N x T x D, got " + nc::shape_string(z.shape()));
  const std::size_t n = z.dim(0);
  const std::size_t features = z.dim(1) * z.dim(2);
  if (wq.rank() != 2 || wk.shape() != wq.shape() || wq.dim(0) != features) {
    throw nc::ShapeError("spatial_attention projections " + nc::shape_string(wq.shape()) + "/" +
                         nc::shape_string(wk.shape()) + " do not fit " + std::to_string(features) +
                         " flattened features");
  }
  const double dk = static_cast<double>(wq.dim(1));
  Tensor flat = nc::reshape(z, {n, features});
  Tensor q = nc::matmul(flat, wq);
  Tensor k = nc::matmul(flat, wk);
  Tensor scores = nc::scale(nc::matmul(q, nc::transpose_last2(k)), 1.0 / std::sqrt(dk));
  return nc::softmax_rows(scores);
}

Tensor hard_threshold(const Tensor& m, double tau) {
  std::vector<double> mask(m.size());
  const auto v = m.values();
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = v[i] < tau ? 0.0 : 1.0;
  return nc::mul(m, Tensor(m.shape(), std::move(mask)));
}

double nonzero_ratio(const Tensor& a) {
  std::size_t count = 0;
  for (double v : a.values()) count += v != 0.0;
  return static_cast<double>(count) / static_cast<double>(a.size());
}

Tensor apply_options(const Tensor& a, const AdjacencyOptions& options) {
  const std::size_t n = square_extent(a, "apply_options");
  Tensor out = a;
  if (options.undirected) {
    Tensor at = nc::transpose_last2(out);
    out = options.symmetrize == Symmetrize::kMax ? nc::maximum(out, at)
                                                 : nc::scale(nc::add(out, at), 0.5);
  }
  if (options.set_diag) {
    std::vector<double> off(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) off[i * n + i] = 0.0;
    out = nc::add(nc::mul(out, Tensor({n, n}, std::move(off))), Tensor::identity(n));
  }
  return out;
}

GeneratedAdjacency sparsify(const Tensor& m, const Tensor* geographic,
                            const AdjacencyOptions& options, const SparsityPolicy& policy) {
  options.validate();
  const std::size_t n = square_extent(m, "sparsify");
  GeneratedAdjacency result;
  if (n == 1) {
    result.weights = Tensor::matrix({{1.0}});
    result.tau = 1.0;
    result.rho = policy.rho_default;
    return result;
  }
  result.tau = options.threshold.value_or(1.0 / static_cast<double>(n));
  if (geographic) {
    result.rho = policy.rho_source == RhoSource::kGeographic ? nonzero_ratio(*geographic)
                                                             : nonzero_ratio(m);
  } else {
    result.rho = policy.rho_default;
  }
  Tensor chosen = m;
  if (options.truncate) {
    Tensor candidate = hard_threshold(m, result.tau);
    if (nonzero_ratio(candidate) > result.rho) {
      chosen = candidate;
      result.truncated = true;
    }
  }
  result.weights = apply_options(chosen, options);
  return result;
}

Tensor normalize_sym(const Tensor& a) {
  const std::size_t n = square_extent(a, "normalize_sym");
  const auto v = a.values();
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) degree[i] += v[i * n + j];
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) s[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  std::vector<double> out_v(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out_v[i * n + j] = s[i] * v[i * n + j] * s[j];
  Tensor out = nc::make_result({n, n}, std::move(out_v));
  auto ai = a.impl();
  nc::record_op(out, {&a}, [ai, n, s, degree](std::span<const double> g) {
    auto& ga = ai->grad_buffer();
    const auto& av = ai->values;
    // d(out_ij)/d(s_i) = A_ij s_j and d(out_ij)/d(s_j) = s_i A_ij.
    std::vector<double> ds(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        ds[i] += g[i * n + j] * av[i * n + j] * s[j];
        ds[j] += g[i * n + j] * s[i] * av[i * n + j];
      }
    for (std::size_t k = 0; k < n; ++k) {
      // s_k = deg_k^{-1/2}, d(s_k)/d(deg_k) = -s_k^3 / 2; every A_kl feeds deg_k.
      const double ddeg = degree[k] > 0.0 ? -0.5 * s[k] * s[k] * s[k] * ds[k] : 0.0;
      for (std::size_t l = 0; l < n; ++l) ga[k * n + l] += g[k * n + l] * s[k] * s[l] + ddeg;
    }
  });
  return out;
}

double mobility_indicator(const Tensor& a) {
  const std::size_t n = square_extent(a, "mobility_indicator");
  std::size_t positive = 0;
  for (double v : a.values()) positive += v > 0.0;
  return static_cast<double>(positive) / static_cast<double>(n * n);
}

void write_snapshot(const AdjacencySnapshot& snapshot, const std::filesystem::path& path) {
  const std::size_t n = square_extent(snapshot.weights, "write_snapshot");
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "# N=" << n << " block=" << snapshot.block << " sample_start=" << snapshot.sample_start << '\n';
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", snapshot.weights.at(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

AdjacencySnapshot read_snapshot(const std::filesystem::path& path) {
  util::CsvReader reader(path);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  while (auto row = reader.next()) {
    if (rows == 0) cols = row->size();
    if (row->size() != cols) reader.fail("ragged snapshot row");
    for (const auto& f : *row) values.push_back(reader.parse_double(f));
    ++rows;
  }
  if (reader.comments.empty()) throw DataError(path.string() + ": missing snapshot header");
  AdjacencySnapshot snap;
  std::size_t n = 0;
  std::istringstream header(reader.comments.front().substr(1));
  std::string token;
  while (header >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "N") n = std::stoul(value);
    if (key == "block") snap.block = std::stoul(value);
    if (key == "sample_start") snap.sample_start = value;
  }
  if (n == 0 || rows != n || cols != n) {
    throw DataError(path.string() + ": snapshot header N=" + std::to_string(n) + " does not match " +
                    std::to_string(rows) + "x" + std::to_string(cols) + " body");
  }
  snap.weights = Tensor({n, n}, std::move(values));
  return snap;
}

}  // namespace spatio::graph
