#pragma once

// Central finite-difference gradient checker for double-precision graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hpgn/tensor.hpp"

namespace hpgn::testing {

struct GradCheckResult {
  double rel_error = 0;      // max |analytic - numeric| / max(max |numeric|, max |analytic|)
  std::size_t checked = 0;   // coordinates compared
  std::size_t skipped = 0;   // coordinates whose stencil crossed a relu/clamp/abs kink
  std::string worst;         // description of the worst coordinate
};

/// `loss` must rebuild the scalar from `inputs` on every call. Each input
/// coordinate is perturbed by +-eps; coordinates whose perturbation changes
/// any piecewise-linear branch decision are skipped, since the derivative is
/// not defined across the kink.
inline GradCheckResult gradcheck(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> inputs,
                                 double eps = 1e-3, std::size_t max_coords_per_input = 0) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape<double> tape;
    backward(loss());
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    std::vector<double> g(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }

  GradCheckResult r;
  double max_num = 0, max_ana = 0, max_diff = 0;
  NoGradGuard<double> no_grad;
  diag::BranchProbe probe;
  auto eval = [&](std::uint64_t& sig) {
    probe.reset();
    const double v = loss().item();
    sig = probe.signature();
    return v;
  };
  std::uint64_t base_sig = 0;
  eval(base_sig);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    auto data = t.mutable_data();
    const std::size_t n = data.size();
    const std::size_t stride = max_coords_per_input && n > max_coords_per_input ? n / max_coords_per_input : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const double keep = data[i];
      std::uint64_t sig_up = 0, sig_down = 0;
      data[i] = keep + eps;
      const double up = eval(sig_up);
      data[i] = keep - eps;
      const double down = eval(sig_down);
      data[i] = keep;
      if (sig_up != base_sig || sig_down != base_sig) {
        ++r.skipped;
        continue;
      }
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[k][i];
      max_num = std::max(max_num, std::abs(numeric));
      max_ana = std::max(max_ana, std::abs(a));
      if (std::abs(a - numeric) > max_diff) {
        max_diff = std::abs(a - numeric);
        r.worst = "input " + std::to_string(k) + " index " + std::to_string(i) + ": analytic " + std::to_string(a) +
                  " numeric " + std::to_string(numeric);
      }
      ++r.checked;
    }
  }
  const double scale = std::max({max_num, max_ana, 1e-12});
  r.rel_error = max_diff / scale;
  return r;
}

}  // namespace hpgn::testing
