#pragma once

#include <cmath>
#include <vector>

#include "graphpde/errors.hpp"

namespace graphpde::nn {

/// iRprop- : sign-based per-parameter steps, no weight backtracking, gradient
/// memory zeroed on a sign flip (which also suppresses that step's update).
struct RpropConfig {
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double step_init = 1e-6;
  double step_min = 1e-9;
  double step_max = 1e-3;
};

struct RpropState {
  RpropConfig cfg;
  std::vector<double> step;
  std::vector<double> prev_grad;

  RpropState() = default;
  RpropState(long n, RpropConfig c = {}) : cfg(c), step(n, c.step_init), prev_grad(n, 0.0) {}
};

inline double sign_of(double x) { return (x > 0.0) - (x < 0.0); }

inline void rprop_step(RpropState& state, std::vector<double>& params,
                       const std::vector<double>& grad) {
  require(params.size() == grad.size() && params.size() == state.step.size(),
          ErrorCode::ShapeMismatch, "rprop size mismatch");
  for (double g : grad)
    require(std::isfinite(g), ErrorCode::NonFiniteGradient,
            "non-finite gradient entry; aborting run");

  const RpropConfig& c = state.cfg;
  const long n = static_cast<long>(params.size());
  for (long i = 0; i < n; ++i) {
    double g = grad[i];
    const double s = state.prev_grad[i] * g;
    if (s > 0.0) {
      state.step[i] = std::min(state.step[i] * c.eta_plus, c.step_max);
    } else if (s < 0.0) {
      state.step[i] = std::max(state.step[i] * c.eta_minus, c.step_min);
      g = 0.0;  // skip the update and forget the sign this iteration
    }
    params[i] -= sign_of(g) * state.step[i];
    state.prev_grad[i] = g;
  }
}

}  // namespace graphpde::nn
