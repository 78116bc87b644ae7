#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "graphpde/errors.hpp"
#include "graphpde/field.hpp"
#include "graphpde/geometry.hpp"
#include "graphpde/parallel.hpp"
#include "graphpde/rng.hpp"

// Ground-truth data factory: random Fourier initial conditions, implicit
// finite-difference reference solvers for the three benchmark PDEs on a
// uniform fine grid, and the downsampling/perturbation pipeline that turns
// fine trajectories into sparse irregular datasets.

namespace graphpde::datagen {

enum class PdeKind : int { heat = 0, convdiff = 1, burgers = 2 };
enum class BoundaryKind : int { periodic = 0, dirichlet = 1 };

inline int state_dim(PdeKind k) { return k == PdeKind::burgers ? 2 : 1; }

struct EquationSpec {
  PdeKind kind = PdeKind::convdiff;
  double diffusion = 0.25;
  double vel_x = 5.0, vel_y = 2.0;  // convection velocity (convdiff only)
  geo::Vec2 domain_lo{0.0, 0.0};
  geo::Vec2 domain_hi{2.0 * 3.14159265358979323846, 2.0 * 3.14159265358979323846};
  BoundaryKind bc = BoundaryKind::periodic;
  int fourier_modes = 4;
  int gt_grid = 128;
  double gt_dt = 2e-4;
};

inline EquationSpec default_equation(PdeKind kind) {
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  EquationSpec s;
  s.kind = kind;
  switch (kind) {
    case PdeKind::heat:
      s.diffusion = 0.2;
      s.vel_x = s.vel_y = 0.0;
      s.domain_lo = {0.0, 0.0};
      s.domain_hi = {1.0, 1.0};
      s.bc = BoundaryKind::dirichlet;
      s.fourier_modes = 10;
      s.gt_dt = 1e-4;
      break;
    case PdeKind::convdiff:
      s.diffusion = 0.25;
      s.vel_x = 5.0;
      s.vel_y = 2.0;
      s.domain_lo = {0.0, 0.0};
      s.domain_hi = {two_pi, two_pi};
      s.bc = BoundaryKind::periodic;
      s.fourier_modes = 4;
      s.gt_dt = 2e-4;
      break;
    case PdeKind::burgers:
      s.diffusion = 0.15;
      s.vel_x = s.vel_y = 0.0;
      s.domain_lo = {0.0, 0.0};
      s.domain_hi = {two_pi, two_pi};
      s.bc = BoundaryKind::periodic;
      s.fourier_modes = 2;
      s.gt_dt = 1.6e-3;
      break;
  }
  s.gt_grid = 128;
  return s;
}

/// Uniform r x r node layout. Periodic grids omit the duplicate right/top
/// boundary row; Dirichlet grids include both boundaries. Node index is
/// iy * r + ix.
struct FineGrid {
  int r = 0;
  double lox = 0, loy = 0;
  double h = 0;
  bool periodic = true;

  int n_nodes() const { return r * r; }
  geo::Vec2 coord(int idx) const {
    const int ix = idx % r, iy = idx / r;
    return {lox + ix * h, loy + iy * h};
  }
  bool is_boundary(int idx) const {
    if (periodic) return false;
    const int ix = idx % r, iy = idx / r;
    return ix == 0 || iy == 0 || ix == r - 1 || iy == r - 1;
  }
};

inline FineGrid make_grid(const EquationSpec& spec) {
  require(spec.gt_grid >= 4, ErrorCode::InvalidArgument, "gt_grid too small");
  FineGrid g;
  g.r = spec.gt_grid;
  g.lox = spec.domain_lo.x;
  g.loy = spec.domain_lo.y;
  g.periodic = spec.bc == BoundaryKind::periodic;
  const double span = spec.domain_hi.x - spec.domain_lo.x;
  g.h = g.periodic ? span / g.r : span / (g.r - 1);
  return g;
}

// ---------------------------------------------------------------------------
// Initial conditions: truncated random Fourier series, min-max normalized to
// [0,1] (heat, convection-diffusion) or affinely mapped to [-3,3] per
// component (Burgers). Coefficient draw order: per component, k then l
// ascending, lambda before gamma.
// ---------------------------------------------------------------------------

namespace detail {

inline void fourier_field(const FineGrid& g, int n_modes, Rng& rng, double* out) {
  const int r = g.r;
  const int modes = 2 * n_modes + 1;
  std::vector<double> lam(static_cast<size_t>(modes) * modes);
  std::vector<double> gam(static_cast<size_t>(modes) * modes);
  for (int a = 0; a < modes * modes; ++a) {
    lam[a] = rng.normal();
    gam[a] = rng.normal();
  }
  // cos(kx + ly) expanded over per-axis tables.
  std::vector<double> ck(static_cast<size_t>(modes) * r), sk(ck.size());
  std::vector<double> cl(ck.size()), sl(ck.size());
  for (int m = 0; m < modes; ++m) {
    const int k = m - n_modes;
    for (int i = 0; i < r; ++i) {
      const double x = g.lox + i * g.h;
      ck[static_cast<size_t>(m) * r + i] = std::cos(k * x);
      sk[static_cast<size_t>(m) * r + i] = std::sin(k * x);
    }
  }
  for (int m = 0; m < modes; ++m) {
    const int l = m - n_modes;
    for (int i = 0; i < r; ++i) {
      const double y = g.loy + i * g.h;
      cl[static_cast<size_t>(m) * r + i] = std::cos(l * y);
      sl[static_cast<size_t>(m) * r + i] = std::sin(l * y);
    }
  }
  for (int i = 0; i < r * r; ++i) out[i] = 0.0;
  for (int mk = 0; mk < modes; ++mk) {
    for (int ml = 0; ml < modes; ++ml) {
      const double la = lam[static_cast<size_t>(mk) * modes + ml];
      const double ga = gam[static_cast<size_t>(mk) * modes + ml];
      const double* ckx = ck.data() + static_cast<size_t>(mk) * r;
      const double* skx = sk.data() + static_cast<size_t>(mk) * r;
      const double* cly = cl.data() + static_cast<size_t>(ml) * r;
      const double* sly = sl.data() + static_cast<size_t>(ml) * r;
      for (int iy = 0; iy < r; ++iy) {
        const double cy = cly[iy], sy = sly[iy];
        double* row = out + static_cast<size_t>(iy) * r;
        for (int ix = 0; ix < r; ++ix) {
          // cos(kx+ly) = cx*cy - sx*sy ; sin(kx+ly) = sx*cy + cx*sy
          const double cx = ckx[ix], sx = skx[ix];
          row[ix] += la * (cx * cy - sx * sy) + ga * (sx * cy + cx * sy);
        }
      }
    }
  }
}

}  // namespace detail

inline Field sample_initial_condition(const EquationSpec& spec, std::uint64_t seed) {
  const FineGrid g = make_grid(spec);
  const int d = state_dim(spec.kind);
  const int n = g.n_nodes();
  Field u(n, d);
  std::vector<double> raw(n);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Rng rng(attempt == 0 ? seed : mix_seed(seed, 0xD15C0000u + attempt));
    bool ok = true;
    for (int c = 0; c < d && ok; ++c) {
      detail::fourier_field(g, spec.fourier_modes, rng, raw.data());
      double mn = raw[0], mx = raw[0];
      for (double x : raw) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
      }
      if (!(mx > mn)) {
        ok = false;
        break;
      }
      const double inv = mx - mn;
      for (int i = 0; i < n; ++i) {
        const double t = (raw[i] - mn) / inv;  // exact 0 at min, exact 1 at max
        u.at(i, c) = (spec.kind == PdeKind::burgers) ? 6.0 * (t - 0.5) : t;
      }
    }
    if (ok) return u;
  }
  raise(ErrorCode::DegenerateField, "constant Fourier field after reseeding");
}

// ---------------------------------------------------------------------------
// Reference solvers. Diffusion is treated implicitly (backward Euler, solved
// matrix-free by conjugate gradient on the SPD operator I - dt*D*Lap);
// convection terms are evaluated explicitly at the previous step with
// centered differences. Dirichlet boundaries stay pinned at u0.
// ---------------------------------------------------------------------------

struct FineTrajectory {
  std::vector<double> times;
  std::vector<Field> frames;
};

namespace detail {

// 5-point Laplacian with periodic wrap, scale = 1/h^2.
inline void laplacian_periodic(const double* u, double* out, int r, double inv_h2) {
  for (int iy = 0; iy < r; ++iy) {
    const int ym = (iy == 0) ? r - 1 : iy - 1;
    const int yp = (iy == r - 1) ? 0 : iy + 1;
    for (int ix = 0; ix < r; ++ix) {
      const int xm = (ix == 0) ? r - 1 : ix - 1;
      const int xp = (ix == r - 1) ? 0 : ix + 1;
      out[iy * r + ix] = inv_h2 * (u[iy * r + xm] + u[iy * r + xp] + u[ym * r + ix] +
                                   u[yp * r + ix] - 4.0 * u[iy * r + ix]);
    }
  }
}

/// CG for (I - coef*Lap) x = b on the periodic grid. coef = dt*D >= 0.
inline void cg_solve_periodic(std::vector<double>& x, const std::vector<double>& b,
                              int r, double coef, double inv_h2) {
  const int n = r * r;
  double nb = 0.0;
  for (int i = 0; i < n; ++i) nb += b[i] * b[i];
  nb = std::sqrt(nb);
  if (nb == 0.0) {
    x.assign(n, 0.0);
    return;
  }
  const double tol = 1e-12 * nb;
  std::vector<double> lap(n), res(n), p(n), ap(n);
  // x0 = b (operator is a small perturbation of the identity)
  x = b;
  laplacian_periodic(x.data(), lap.data(), r, inv_h2);
  double rs = 0.0;
  for (int i = 0; i < n; ++i) {
    res[i] = b[i] - (x[i] - coef * lap[i]);
    rs += res[i] * res[i];
  }
  p = res;
  for (int it = 0; it < 2000; ++it) {
    if (std::sqrt(rs) <= tol) return;
    laplacian_periodic(p.data(), ap.data(), r, inv_h2);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) {
      ap[i] = p[i] - coef * ap[i];
      pap += p[i] * ap[i];
    }
    require(pap > 0.0, ErrorCode::LinearSolveFailure, "CG curvature lost");
    const double alpha = rs / pap;
    double rs_new = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      res[i] -= alpha * ap[i];
      rs_new += res[i] * res[i];
    }
    const double beta = rs_new / rs;
    rs = rs_new;
    for (int i = 0; i < n; ++i) p[i] = res[i] + beta * p[i];
  }
  raise(ErrorCode::LinearSolveFailure, "CG stagnated (periodic solve)");
}

// Interior-only Laplacian for the Dirichlet problem; boundary values of ufull
// contribute as constants.
inline void laplacian_dirichlet(const double* ufull, double* out, int r,
                                double inv_h2) {
  for (int iy = 1; iy < r - 1; ++iy) {
    for (int ix = 1; ix < r - 1; ++ix) {
      out[iy * r + ix] =
          inv_h2 * (ufull[iy * r + ix - 1] + ufull[iy * r + ix + 1] +
                    ufull[(iy - 1) * r + ix] + ufull[(iy + 1) * r + ix] -
                    4.0 * ufull[iy * r + ix]);
    }
  }
}

inline void cg_solve_dirichlet(std::vector<double>& x, const std::vector<double>& b,
                               int r, double coef, double inv_h2) {
  // Vectors are full-grid sized; boundary entries are zero and stay zero
  // (the operator acts on the interior with homogeneous boundary).
  const int n = r * r;
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    laplacian_dirichlet(v.data(), out.data(), r, inv_h2);
    for (int iy = 1; iy < r - 1; ++iy)
      for (int ix = 1; ix < r - 1; ++ix) {
        const int i = iy * r + ix;
        out[i] = v[i] - coef * out[i];
      }
  };
  double nb = 0.0;
  for (int i = 0; i < n; ++i) nb += b[i] * b[i];
  nb = std::sqrt(nb);
  if (nb == 0.0) {
    x.assign(n, 0.0);
    return;
  }
  const double tol = 1e-12 * nb;
  std::vector<double> res(n, 0.0), p(n, 0.0), ap(n, 0.0);
  x = b;
  apply(x, ap);
  double rs = 0.0;
  for (int iy = 1; iy < r - 1; ++iy)
    for (int ix = 1; ix < r - 1; ++ix) {
      const int i = iy * r + ix;
      res[i] = b[i] - ap[i];
      rs += res[i] * res[i];
    }
  p = res;
  for (int it = 0; it < 2000; ++it) {
    if (std::sqrt(rs) <= tol) return;
    apply(p, ap);
    double pap = 0.0;
    for (int iy = 1; iy < r - 1; ++iy)
      for (int ix = 1; ix < r - 1; ++ix) {
        const int i = iy * r + ix;
        pap += p[i] * ap[i];
      }
    require(pap > 0.0, ErrorCode::LinearSolveFailure, "CG curvature lost");
    const double alpha = rs / pap;
    double rs_new = 0.0;
    for (int iy = 1; iy < r - 1; ++iy)
      for (int ix = 1; ix < r - 1; ++ix) {
        const int i = iy * r + ix;
        x[i] += alpha * p[i];
        res[i] -= alpha * ap[i];
        rs_new += res[i] * res[i];
      }
    const double beta = rs_new / rs;
    rs = rs_new;
    for (int iy = 1; iy < r - 1; ++iy)
      for (int ix = 1; ix < r - 1; ++ix) {
        const int i = iy * r + ix;
        p[i] = res[i] + beta * p[i];
      }
  }
  raise(ErrorCode::LinearSolveFailure, "CG stagnated (Dirichlet solve)");
}

// Centered first derivatives, periodic wrap.
inline void gradient_periodic(const double* u, double* gx, double* gy, int r,
                              double inv_2h) {
  for (int iy = 0; iy < r; ++iy) {
    const int ym = (iy == 0) ? r - 1 : iy - 1;
    const int yp = (iy == r - 1) ? 0 : iy + 1;
    for (int ix = 0; ix < r; ++ix) {
      const int xm = (ix == 0) ? r - 1 : ix - 1;
      const int xp = (ix == r - 1) ? 0 : ix + 1;
      gx[iy * r + ix] = inv_2h * (u[iy * r + xp] - u[iy * r + xm]);
      gy[iy * r + ix] = inv_2h * (u[yp * r + ix] - u[ym * r + ix]);
    }
  }
}

}  // namespace detail

inline FineTrajectory solve_ground_truth(const EquationSpec& spec, const Field& u0,
                                         double t_end) {
  const FineGrid g = make_grid(spec);
  const int r = g.r;
  const int n = g.n_nodes();
  const int d = state_dim(spec.kind);
  require(u0.n == n && u0.d == d, ErrorCode::ShapeMismatch,
          "initial condition does not match fine grid");
  require(t_end > 0, ErrorCode::InvalidArgument, "t_end must be positive");
  require(u0.all_finite(), ErrorCode::NonFiniteState, "non-finite initial condition");

  const double dt = spec.gt_dt;
  const double inv_h2 = 1.0 / (g.h * g.h);
  const double inv_2h = 1.0 / (2.0 * g.h);
  const double coef = dt * spec.diffusion;
  const long n_steps = std::lround(t_end / dt);
  require(std::abs(n_steps * dt - t_end) <= 1e-9 && n_steps >= 1,
          ErrorCode::TimeNotOnGrid, "t_end is not a multiple of gt_dt");

  FineTrajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.frames.reserve(n_steps + 1);
  traj.times.push_back(0.0);
  traj.frames.push_back(u0);

  Field u = u0;
  std::vector<double> b(n), x(n), gx(n), gy(n), comp(n);

  for (long step = 1; step <= n_steps; ++step) {
    if (spec.kind == PdeKind::heat && spec.bc == BoundaryKind::dirichlet) {
      // Move the (pinned) boundary contribution of the implicit operator to
      // the right-hand side, solve on the interior.
      for (int i = 0; i < n; ++i) b[i] = 0.0;
      for (int iy = 1; iy < r - 1; ++iy) {
        for (int ix = 1; ix < r - 1; ++ix) {
          const int i = iy * r + ix;
          double bd = 0.0;
          if (ix == 1) bd += u0.at(iy * r, 0);
          if (ix == r - 2) bd += u0.at(iy * r + r - 1, 0);
          if (iy == 1) bd += u0.at(ix, 0);
          if (iy == r - 2) bd += u0.at((r - 1) * r + ix, 0);
          b[i] = u.at(i, 0) + coef * inv_h2 * bd;
        }
      }
      detail::cg_solve_dirichlet(x, b, r, coef, inv_h2);
      for (int iy = 1; iy < r - 1; ++iy)
        for (int ix = 1; ix < r - 1; ++ix) u.at(iy * r + ix, 0) = x[iy * r + ix];
      // boundary rows stay exactly at u0
    } else if (spec.kind == PdeKind::burgers) {
      // Both convection terms come from the previous state, then each
      // component gets its own implicit diffusion solve.
      std::vector<std::vector<double>> rhs(d, std::vector<double>(n));
      for (int c = 0; c < d; ++c) {
        for (int i = 0; i < n; ++i) comp[i] = u.at(i, c);
        detail::gradient_periodic(comp.data(), gx.data(), gy.data(), r, inv_2h);
        for (int i = 0; i < n; ++i)
          rhs[c][i] = comp[i] - dt * (u.at(i, 0) * gx[i] + u.at(i, 1) * gy[i]);
      }
      for (int c = 0; c < d; ++c) {
        detail::cg_solve_periodic(x, rhs[c], r, coef, inv_h2);
        for (int i = 0; i < n; ++i) u.at(i, c) = x[i];
      }
    } else {
      // heat (periodic test config) and convection-diffusion
      if (spec.kind == PdeKind::convdiff) {
        for (int i = 0; i < n; ++i) comp[i] = u.at(i, 0);
        detail::gradient_periodic(comp.data(), gx.data(), gy.data(), r, inv_2h);
        for (int i = 0; i < n; ++i)
          b[i] = comp[i] - dt * (spec.vel_x * gx[i] + spec.vel_y * gy[i]);
      } else {
        for (int i = 0; i < n; ++i) b[i] = u.at(i, 0);
      }
      detail::cg_solve_periodic(x, b, r, coef, inv_h2);
      for (int i = 0; i < n; ++i) u.at(i, 0) = x[i];
    }
    require(u.all_finite(), ErrorCode::NonFiniteState,
            "reference solution became non-finite at step " + std::to_string(step));
    traj.times.push_back(step * dt);
    traj.frames.push_back(u);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Downsampling and perturbations
// ---------------------------------------------------------------------------

struct SimulationRecord {
  std::vector<geo::Vec2> coords;
  std::vector<double> times;
  std::vector<Field> states;  // aligned with times, each n_nodes x d

  int n_nodes() const { return static_cast<int>(coords.size()); }
  int n_times() const { return static_cast<int>(times.size()); }
  int state_dim() const { return states.empty() ? 0 : states[0].d; }
};

struct Dataset {
  EquationSpec equation;
  std::vector<SimulationRecord> sims;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Picks n_nodes distinct fine-grid nodes uniformly at random and extracts
/// the state at the requested times (which must sit on the gt_dt grid).
/// Dirichlet boundary nodes are excluded: their values are constants.
inline SimulationRecord downsample(const FineTrajectory& traj, const EquationSpec& spec,
                                   int n_nodes, const std::vector<double>& t_obs,
                                   std::uint64_t seed) {
  const FineGrid g = make_grid(spec);
  std::vector<int> candidates;
  candidates.reserve(g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i)
    if (!g.is_boundary(i)) candidates.push_back(i);
  require(n_nodes >= 1 && n_nodes <= static_cast<int>(candidates.size()),
          ErrorCode::InvalidArgument,
          "requested node count exceeds available fine-grid nodes");

  Rng rng(seed);
  const std::vector<int> pick =
      rng.sample_without_replacement(static_cast<int>(candidates.size()), n_nodes);

  SimulationRecord rec;
  rec.coords.reserve(n_nodes);
  for (int idx : pick) rec.coords.push_back(g.coord(candidates[idx]));
  rec.times = t_obs;
  const double dt = spec.gt_dt;
  const int d = state_dim(spec.kind);
  rec.states.reserve(t_obs.size());
  for (double t : t_obs) {
    const long k = std::lround(t / dt);
    require(std::abs(k * dt - t) <= 1e-9 && k >= 0 &&
                k < static_cast<long>(traj.frames.size()),
            ErrorCode::TimeNotOnGrid,
            "observation time " + std::to_string(t) + " not on the gt_dt grid");
    Field f(n_nodes, d);
    for (int i = 0; i < n_nodes; ++i)
      for (int c = 0; c < d; ++c)
        f.at(i, c) = traj.frames[k].at(candidates[pick[i]], c);
    rec.states.push_back(std::move(f));
  }
  return rec;
}

/// Jitters interior observation times with seeded Gaussian noise, keeps the
/// endpoints, restores strict monotonicity (minimum gap 1e-4 s), then snaps
/// to the nearest gt_dt multiple so extraction stays exact.
inline std::vector<double> perturb_times(const std::vector<double>& times, double sigma,
                                         std::uint64_t seed, double snap_dt) {
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "sigma must be non-negative");
  require(times.size() >= 2, ErrorCode::InvalidArgument, "need at least two times");
  if (sigma == 0.0) return times;
  const int m = static_cast<int>(times.size());
  std::vector<double> t = times;
  Rng rng(seed);
  for (int i = 1; i + 1 < m; ++i) t[i] += sigma * rng.normal();
  std::sort(t.begin() + 1, t.end() - 1);
  constexpr double kMinGap = 1e-4;
  for (int i = 1; i < m; ++i) t[i] = std::max(t[i], t[i - 1] + kMinGap);
  t[m - 1] = times[m - 1];
  for (int i = m - 2; i >= 1; --i) t[i] = std::min(t[i], t[i + 1] - kMinGap);
  for (int i = 1; i + 1 < m; ++i) t[i] = std::lround(t[i] / snap_dt) * snap_dt;
  // resolve collisions introduced by snapping
  for (int i = 1; i < m; ++i)
    if (t[i] <= t[i - 1]) t[i] = t[i - 1] + snap_dt;
  t[m - 1] = times[m - 1];
  for (int i = m - 2; i >= 1; --i)
    if (t[i] >= t[i + 1]) t[i] = t[i + 1] - snap_dt;
  for (int i = 1; i < m; ++i)
    require(t[i] > t[i - 1], ErrorCode::InvalidArgument,
            "time jitter produced a non-increasing grid (sigma too large)");
  return t;
}

/// I.i.d. seeded Gaussian noise on every state entry; coords/times untouched.
inline SimulationRecord add_noise(const SimulationRecord& rec, double sigma,
                                  std::uint64_t seed) {
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "sigma must be non-negative");
  if (sigma == 0.0) return rec;
  SimulationRecord out = rec;
  Rng rng(seed);
  for (Field& f : out.states)
    for (double& x : f.v) x += sigma * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Whole-dataset generation
// ---------------------------------------------------------------------------

struct GenerateOptions {
  PdeKind kind = PdeKind::convdiff;
  int sims = 24;
  int nodes = 250;
  double t0 = 0.0, t1 = 0.2, dt = 0.02;
  std::vector<double> times;  // optional explicit grid; overrides t0/t1/dt
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  double time_jitter = 0.0;
  int gt_grid = 0;    // 0: equation default
  double gt_dt = 0.0; // 0: equation default
};

inline std::vector<double> observation_grid(const GenerateOptions& o) {
  if (!o.times.empty()) {
    for (size_t i = 1; i < o.times.size(); ++i)
      require(o.times[i] > o.times[i - 1], ErrorCode::InvalidArgument,
              "explicit times must be strictly increasing");
    return o.times;
  }
  require(o.dt > 0 && o.t1 > o.t0 && o.t0 >= 0, ErrorCode::InvalidArgument,
          "bad t0/t1/dt");
  const long m = std::lround((o.t1 - o.t0) / o.dt);
  require(m >= 1 && std::abs(m * o.dt - (o.t1 - o.t0)) <= 1e-9,
          ErrorCode::InvalidArgument, "dt does not divide t1 - t0");
  std::vector<double> t(m + 1);
  for (long i = 0; i <= m; ++i) t[i] = o.t0 + i * o.dt;
  t.back() = o.t1;
  return t;
}

inline Dataset generate_dataset(const GenerateOptions& opts) {
  require(opts.sims >= 1, ErrorCode::InvalidArgument, "sims must be >= 1");
  EquationSpec spec = default_equation(opts.kind);
  if (opts.gt_grid > 0) spec.gt_grid = opts.gt_grid;
  if (opts.gt_dt > 0) spec.gt_dt = opts.gt_dt;

  const std::vector<double> base_times = observation_grid(opts);

  Dataset ds;
  ds.equation = spec;
  ds.sims.resize(opts.sims);

  parallel_for(opts.sims, [&](int si, int) {
    const std::uint64_t base = mix_seed(opts.seed, si);
    const Field ic = sample_initial_condition(spec, mix_seed(base, 1));
    const FineTrajectory traj = solve_ground_truth(spec, ic, base_times.back());
    std::vector<double> t_obs = base_times;
    if (opts.time_jitter > 0)
      t_obs = perturb_times(base_times, opts.time_jitter, mix_seed(base, 3), spec.gt_dt);
    SimulationRecord rec = downsample(traj, spec, opts.nodes, t_obs, mix_seed(base, 2));
    if (opts.noise_sigma > 0) rec = add_noise(rec, opts.noise_sigma, mix_seed(base, 4));
    ds.sims[si] = std::move(rec);
  });

  auto fmt = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  ds.metadata = {
      {"generator", "graphpde.datagen"},
      {"seed", std::to_string(opts.seed)},
      {"sims", std::to_string(opts.sims)},
      {"nodes", std::to_string(opts.nodes)},
      {"noise_sigma", fmt(opts.noise_sigma)},
      {"time_jitter", fmt(opts.time_jitter)},
      {"gt_grid", std::to_string(spec.gt_grid)},
      {"gt_dt", fmt(spec.gt_dt)},
      {"fourier_modes", std::to_string(spec.fourier_modes)},
      {"boundary_nodes_excluded", spec.bc == BoundaryKind::dirichlet ? "1" : "0"},
  };
  return ds;
}

}  // namespace graphpde::datagen
