#include "spatio/model/config.hpp"

#include <stdexcept>

namespace spatio::model {

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::kTrans: return "Trans";
    case Variant::kTransGcn: return "Trans+GCN";
    case Variant::kTransAdp: return "Trans+Adp";
    case Variant::kTransGcnAdp: return "Trans+GCN+Adp";
    case Variant::kDLinear: return "DLinear";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "Trans") return Variant::kTrans;
  if (name == "Trans+GCN" || name == "TransGCN") return Variant::kTransGcn;
  if (name == "Trans+Adp" || name == "TransAdp") return Variant::kTransAdp;
  if (name == "Trans+GCN+Adp" || name == "TransGCNAdp") return Variant::kTransGcnAdp;
  if (name == "DLinear") return Variant::kDLinear;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

bool uses_geographic(Variant variant) {
  return variant == Variant::kTransGcn || variant == Variant::kTransGcnAdp;
}

bool uses_generated(Variant variant) {
  return variant == Variant::kTransAdp || variant == Variant::kTransGcnAdp;
}

bool is_transformer(Variant variant) { return variant != Variant::kDLinear; }

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
  };
  require(nodes > 0 && window > 0 && horizon > 0 && channels > 0, "extents must be positive");
  if (!is_transformer(variant)) return;
  require(d_model > 0 && heads > 0 && layers > 0, "D, heads and L must be positive");
  require(d_model % heads == 0, "D must be divisible by the head count");
  require(d_model % 2 == 0, "D must be even for the positional encoding");
  generated_options.validate();
}

}  // namespace spatio::model
