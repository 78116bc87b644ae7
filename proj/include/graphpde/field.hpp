#pragma once

#include <cmath>
#include <vector>

#include "graphpde/errors.hpp"

namespace graphpde {

/// Per-node state values, row-major N x d.
struct Field {
  int n = 0;
  int d = 1;
  std::vector<double> v;

  Field() = default;
  Field(int n_, int d_, double fill = 0.0) : n(n_), d(d_), v(static_cast<size_t>(n_) * d_, fill) {}

  double& at(int i, int k) { return v[static_cast<size_t>(i) * d + k]; }
  double at(int i, int k) const { return v[static_cast<size_t>(i) * d + k]; }
  double* row(int i) { return v.data() + static_cast<size_t>(i) * d; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * d; }
  long size() const { return static_cast<long>(v.size()); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline void require_same_shape(const Field& a, const Field& b) {
  require(a.n == b.n && a.d == b.d, ErrorCode::ShapeMismatch,
          "field shapes differ");
}

}  // namespace graphpde
