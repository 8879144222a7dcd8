#include "spatio/model/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "spatio/numcore/ops.hpp"

namespace spatio::model {

namespace nc = numcore;

Tensor positional_encoding(std::size_t steps, std::size_t d_model) {
  if (d_model % 2 != 0) throw std::invalid_argument("positional encoding needs an even D");
  std::vector<double> v(steps * d_model);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < d_model / 2; ++j) {
      const double angle = static_cast<double>(i) /
                           std::pow(10000.0, 2.0 * static_cast<double>(j) / static_cast<double>(d_model));
      v[i * d_model + 2 * j] = std::sin(angle);
      v[i * d_model + 2 * j + 1] = std::cos(angle);
    }
  }
  return Tensor({steps, d_model}, std::move(v));
}

AttentionWeights attention_weights(const ModelParams& params, const std::string& prefix) {
  return {params[prefix + "wq"], params[prefix + "bq"], params[prefix + "wk"], params[prefix + "wv"],
          params[prefix + "bv"], params[prefix + "wo"], params[prefix + "bo"]};
}

Tensor temporal_attention(const Tensor& z, const AttentionWeights& w, std::size_t heads,
                          std::vector<Tensor>* scores) {
  const std::size_t d = z.dim(z.rank() - 1);
  if (heads == 0 || d % heads != 0) throw nc::ShapeError("head count must divide D");
  const std::size_t dk = d / heads;
  const Tensor q = nc::linear(z, w.wq, w.bq);
  const Tensor k = nc::linear(z, w.wk);
  const Tensor v = nc::linear(z, w.wv, w.bv);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::optional<Tensor> merged;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = nc::slice_last(q, h * dk, dk);
    const Tensor kh = nc::slice_last(k, h * dk, dk);
    const Tensor vh = nc::slice_last(v, h * dk, dk);
    const Tensor a = nc::softmax_rows(nc::scale(nc::matmul(qh, nc::transpose_last2(kh)), inv));
    if (scores) scores->push_back(a);
    const Tensor out = nc::matmul(a, vh);
    merged = merged ? nc::concat_last(*merged, out) : out;
  }
  return nc::linear(*merged, w.wo, w.bo);
}

Tensor gcn_propagate(const Tensor& normalized_adjacency, const Tensor& z_t,
                     const std::vector<Tensor>& thetas) {
  if (thetas.empty()) throw std::invalid_argument("gcn_propagate needs at least one kernel");
  if (z_t.rank() != 3 || normalized_adjacency.rank() != 2 ||
      normalized_adjacency.dim(0) != z_t.dim(0) || normalized_adjacency.dim(1) != z_t.dim(0)) {
    throw nc::ShapeError("gcn_propagate: adjacency " + nc::shape_string(normalized_adjacency.shape()) +
                         " does not match features " + nc::shape_string(z_t.shape()));
  }
  // Node axis second-to-last so the adjacency multiplies each time slice.
  Tensor power = nc::permute(z_t, {1, 0, 2});
  Tensor acc = nc::linear(power, thetas[0]);
  for (std::size_t k = 1; k < thetas.size(); ++k) {
    power = nc::matmul(normalized_adjacency, power);
    acc = nc::add(acc, nc::linear(power, thetas[k]));
  }
  return nc::permute(acc, {1, 0, 2});
}

Tensor dual_fuse(const std::optional<Tensor>& h_geo, const std::optional<Tensor>& h_adp,
                 const Tensor& wx) {
  if (!h_geo && !h_adp) throw std::invalid_argument("dual_fuse needs at least one stream");
  const Tensor joined = h_geo && h_adp ? nc::concat_last(*h_geo, *h_adp) : (h_geo ? *h_geo : *h_adp);
  return nc::linear(joined, wx);
}

Tensor block_update(const Tensor& h, const Tensor& z_t) { return nc::add(nc::relu(h), z_t); }

namespace {

std::vector<Tensor> kernels(const ModelParams& params, const std::string& prefix, std::size_t hops) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k <= hops; ++k) out.push_back(params[prefix + std::to_string(k)]);
  return out;
}

void check_input(const ModelConfig& config, const Tensor& x) {
  const nc::Shape expected{config.nodes, config.window, config.channels};
  if (x.shape() != expected) {
    throw nc::ShapeError("model input " + nc::shape_string(x.shape()) + ", expected " +
                         nc::shape_string(expected));
  }
}

}  // namespace

ForwardResult forward(const ModelConfig& config, const ModelParams& params, const Tensor& x,
                      const Tensor* geographic, const ForwardOptions& options) {
  config.validate();
  if (config.variant == Variant::kDLinear) return {dlinear_forward(config, params, x), {}};
  check_input(config, x);

  std::optional<Tensor> geo_norm;
  if (uses_geographic(config.variant)) {
    if (!geographic) throw std::invalid_argument(variant_name(config.variant) + " needs a geographic adjacency");
    geo_norm = graph::normalize_sym(*geographic);
  }

  ForwardResult result;
  Tensor z = nc::add(nc::linear(x, params["embed.weight"], params["embed.bias"]),
                     positional_encoding(config.window, config.d_model));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    const Tensor attn = temporal_attention(z, attention_weights(params, p + "attn."), config.heads);
    const Tensor z_t = nc::add(z, nc::layer_norm(attn, params[p + "norm1.gamma"], params[p + "norm1.beta"]));

    if (config.variant == Variant::kTrans) {
      const Tensor hidden = nc::relu(nc::linear(z_t, params[p + "ffn.w1"], params[p + "ffn.b1"]));
      const Tensor ffn = nc::linear(hidden, params[p + "ffn.w2"], params[p + "ffn.b2"]);
      z = nc::add(z_t, nc::layer_norm(ffn, params[p + "norm2.gamma"], params[p + "norm2.beta"]));
      continue;
    }

    std::optional<Tensor> h_geo;
    std::optional<Tensor> h_adp;
    if (geo_norm) h_geo = gcn_propagate(*geo_norm, z_t, kernels(params, p + "gcn_geo.theta", config.hops));
    if (uses_generated(config.variant)) {
      graph::GeneratedAdjacency generated;
      if (options.generated_override) {
        generated.weights = *options.generated_override;
      } else {
        const Tensor m = graph::spatial_attention(z, params[p + "spatial.wq"], params[p + "spatial.wk"]);
        generated = graph::sparsify(m, geographic, config.generated_options, config.sparsity);
      }
      h_adp = gcn_propagate(graph::normalize_sym(generated.weights), z_t,
                            kernels(params, p + "gcn_adp.theta", config.hops));
      result.generated.push_back(std::move(generated));
    }
    z = block_update(dual_fuse(h_geo, h_adp, params[p + "fuse.wx"]), z_t);
  }
  const Tensor decoded = nc::matmul(nc::transpose_last2(params["decoder.wo"]), z);
  result.prediction = nc::linear(decoded, params["generator.wg"], params["generator.bg"]);
  return result;
}

Tensor dlinear_forward(const ModelConfig& config, const ModelParams& params, const Tensor& x) {
  check_input(config, x);
  const std::size_t n = config.nodes;
  const std::size_t c = config.channels;
  const Tensor series = nc::reshape(nc::permute(x, {0, 2, 1}), {n * c, 1, config.window});
  const Tensor projected = nc::add(nc::matmul(series, params["dlinear.weight"]), params["dlinear.bias"]);
  const Tensor per_channel = nc::reshape(projected, {n, c, config.horizon});
  return nc::reshape(nc::mean_axis(per_channel, 1), {n, config.horizon, 1});
}

}  // namespace spatio::model
