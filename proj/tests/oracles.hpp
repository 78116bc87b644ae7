#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "graphpde/field.hpp"
#include "graphpde/geometry.hpp"
#include "graphpde/mlp.hpp"
#include "graphpde/mpnn.hpp"
#include "graphpde/rng.hpp"

// Independent oracles the tests check the library against. Everything here is
// deliberately written straight-line (std::tanh, double loops, no shared code
// with the library's batched kernels).

namespace oracles {

using graphpde::Field;
namespace geo = graphpde::geo;
namespace nn = graphpde::nn;
namespace mpnn = graphpde::mpnn;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Brute-force empty-circumcircle check: counts (triangle, point) pairs where
/// the point lies strictly inside the circumcircle beyond the tolerance band.
inline int delaunay_violations(const geo::PointSet& ps, const geo::Triangulation& tri) {
  int violations = 0;
  for (const auto& t : tri.triangles) {
    const geo::Vec2 a = ps.coords[t[0]], b = ps.coords[t[1]], c = ps.coords[t[2]];
    for (int p = 0; p < ps.size(); ++p) {
      if (p == t[0] || p == t[1] || p == t[2]) continue;
      double det, scale;
      geo::incircle_det(a, b, c, ps.coords[p], &det, &scale);
      if (det > geo::kInCircleTol * scale) ++violations;
    }
  }
  return violations;
}

inline double triangle_area(geo::Vec2 a, geo::Vec2 b, geo::Vec2 c) {
  return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

/// Area of the convex hull (monotone chain + shoelace).
inline double convex_hull_area(std::vector<geo::Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](geo::Vec2 a, geo::Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  const int n = static_cast<int>(pts.size());
  std::vector<geo::Vec2> hull(2 * n);
  int k = 0;
  auto cross = [](geo::Vec2 o, geo::Vec2 a, geo::Vec2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double area = 0.0;
  for (size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(area);
}

// ---------------------------------------------------------------------------
// Neural nets
// ---------------------------------------------------------------------------

/// Straight-line MLP forward with std::tanh, reading the library's parameter
/// layout (input-major weights, then biases, per layer).
inline std::vector<double> naive_mlp_forward(const nn::MlpSpec& spec,
                                             const std::vector<double>& params,
                                             const std::vector<double>& input) {
  std::vector<double> a = input;
  long off = 0;
  const int L = spec.n_layers();
  for (int l = 0; l < L; ++l) {
    const int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    std::vector<double> z(out);
    for (int o = 0; o < out; ++o) {
      double acc = params[off + static_cast<long>(in) * out + o];  // bias
      for (int k = 0; k < in; ++k) acc += a[k] * params[off + static_cast<long>(k) * out + o];
      z[o] = (l + 1 < L) ? std::tanh(acc) : acc;
    }
    a = std::move(z);
    off += static_cast<long>(in) * out + out;
  }
  return a;
}

/// Naive evaluation of the message-passing differential:
/// out_i = gamma(u_i, mean_j phi(u_i, u_j - u_i, x_j - x_i)).
inline Field naive_mpnn_eval(const geo::Graph& g, const std::vector<geo::Vec2>& coords,
                             const Field& u, const mpnn::SurrogateConfig& cfg,
                             const std::vector<double>& params) {
  const nn::MlpSpec phi = mpnn::phi_spec(cfg);
  const nn::MlpSpec gamma = mpnn::gamma_spec(cfg);
  const long phi_n = nn::param_count(phi);
  const std::vector<double> phi_params(params.begin(), params.begin() + phi_n);
  const std::vector<double> gamma_params(params.begin() + phi_n, params.end());
  const int d = cfg.state_dim;

  Field out(g.n_nodes, d);
  for (int i = 0; i < g.n_nodes; ++i) {
    std::vector<double> mean(cfg.message_dim, 0.0);
    const int deg = g.degree(i);
    for (int k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
      const int j = g.neighbors[k];
      std::vector<double> in;
      for (int c = 0; c < d; ++c) in.push_back(u.at(i, c));
      for (int c = 0; c < d; ++c) in.push_back(u.at(j, c) - u.at(i, c));
      if (cfg.use_edge_features) {
        in.push_back(coords[j].x - coords[i].x);
        in.push_back(coords[j].y - coords[i].y);
      }
      const std::vector<double> msg = naive_mlp_forward(phi, phi_params, in);
      for (int c = 0; c < cfg.message_dim; ++c) mean[c] += msg[c];
    }
    if (deg > 0)
      for (double& m : mean) m /= deg;
    std::vector<double> gin;
    for (int c = 0; c < d; ++c) gin.push_back(u.at(i, c));
    gin.insert(gin.end(), mean.begin(), mean.end());
    const std::vector<double> res = naive_mlp_forward(gamma, gamma_params, gin);
    for (int c = 0; c < d; ++c) out.at(i, c) = res[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central difference d f / d x_i.
inline double central_fd(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x, size_t i, double h) {
  const double xi = x[i];
  x[i] = xi + h;
  const double fp = f(x);
  x[i] = xi - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// Five-point (4th order) central difference; much lower cancellation noise
/// than the 2-point stencil because h can stay large.
inline double central_fd5(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x, size_t i, double h) {
  const double xi = x[i];
  auto at = [&](double v) {
    x[i] = v;
    return f(x);
  };
  const double r =
      (at(xi - 2 * h) - 8.0 * at(xi - h) + 8.0 * at(xi + h) - at(xi + 2 * h)) /
      (12.0 * h);
  x[i] = xi;
  return r;
}

inline double rel_err(double got, double want) {
  const double denom = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / denom;
}

/// Random points with dyadic coordinates (multiples of 2^-16 of the span), so
/// translations by dyadic vectors are exact in floating point.
inline geo::PointSet random_dyadic_points(int n, double lo, double hi,
                                          std::uint64_t seed) {
  graphpde::Rng rng(seed);
  geo::PointSet ps;
  ps.domain_lo = {lo, lo};
  ps.domain_hi = {hi, hi};
  const double span = hi - lo;
  std::set<std::pair<long, long>> used;
  while (static_cast<int>(ps.coords.size()) < n) {
    const long gx = static_cast<long>(rng.next_u64() % 65536);
    const long gy = static_cast<long>(rng.next_u64() % 65536);
    if (!used.insert({gx, gy}).second) continue;
    ps.coords.push_back({lo + span * (gx * 0x1.0p-16), lo + span * (gy * 0x1.0p-16)});
  }
  return ps;
}

/// General random points in [lo, hi]^2 with pairwise separation enforced.
inline geo::PointSet random_points(int n, double lo, double hi, std::uint64_t seed) {
  graphpde::Rng rng(seed);
  geo::PointSet ps;
  ps.domain_lo = {lo, lo};
  ps.domain_hi = {hi, hi};
  while (static_cast<int>(ps.coords.size()) < n) {
    const geo::Vec2 p{rng.uniform(lo, hi), rng.uniform(lo, hi)};
    bool ok = true;
    for (const auto& q : ps.coords)
      if (std::hypot(p.x - q.x, p.y - q.y) < 1e-9) ok = false;
    if (ok) ps.coords.push_back(p);
  }
  return ps;
}

}  // namespace oracles
