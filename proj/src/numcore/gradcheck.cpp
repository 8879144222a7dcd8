#include "spatio/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace spatio::numcore {

GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<NamedTensor> params, double step,
                                        double floor) {
  for (auto& p : params) {
    p.tensor.set_requires_grad(true);
    p.tensor.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }

  GradCheckReport report;
  for (auto& p : params) {
    const std::vector<double> analytic = p.tensor.grad();
    auto values = p.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = loss_fn().item();
      values[i] = original - step;
      const double down = loss_fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), floor});
      const double rel = std::fabs(analytic[i] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.worst_tensor.empty()) {
        report.max_relative_error = rel;
        report.worst_tensor = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
    p.tensor.zero_grad();
  }
  return report;
}

}  // namespace spatio::numcore
