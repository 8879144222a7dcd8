#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spatio/numcore/tensor.hpp"

namespace spatio::numcore {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares the tape gradient of `loss_fn` against central finite differences
/// for every element of every tensor in `params`. The relative error of one
/// element is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<NamedTensor> params, double step = 1e-5,
                                        double floor = 1e-6);

}  // namespace spatio::numcore
