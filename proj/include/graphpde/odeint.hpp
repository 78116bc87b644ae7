#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "graphpde/errors.hpp"
#include "graphpde/field.hpp"
#include "graphpde/mpnn.hpp"

namespace graphpde::ode {

enum class Method { euler, rk4, dopri5 };

struct SolverConfig {
  Method method = Method::dopri5;
  double rtol = 1e-7;
  double atol = 1e-7;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 2000000;
};

inline void validate_solver(const SolverConfig& cfg) {
  require(cfg.rtol > 0 && cfg.atol > 0, ErrorCode::InvalidArgument,
          "rtol and atol must be positive");
  require(cfg.h_min <= cfg.h_init && cfg.h_init <= cfg.h_max,
          ErrorCode::InvalidArgument, "need h_min <= h_init <= h_max");
  require(cfg.max_steps > 0, ErrorCode::InvalidArgument, "max_steps must be positive");
}

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
};

struct IntegrateStats {
  long steps_accepted = 0;
  long steps_rejected = 0;
  long rhs_evals = 0;
};

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Weighted RMS error over the first err_dim components (err_dim < 0: all).
inline double error_norm(const std::vector<double>& e, const std::vector<double>& y0,
                         const std::vector<double>& y1, double atol, double rtol,
                         long err_dim) {
  const long n = (err_dim < 0) ? static_cast<long>(e.size()) : err_dim;
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const double w = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = e[i] / w;
    acc += q * q;
  }
  return std::sqrt(acc / n);
}

}  // namespace detail

/// Integrates u' = f(t, u) and reports the state at every requested time.
/// Steps are clamped to land exactly on each t_eval entry; no interpolation.
/// f has signature void(double t, const std::vector<double>& y,
/// std::vector<double>& dydt).
template <class F>
Trajectory integrate(F&& f, const std::vector<double>& u0,
                     const std::vector<double>& t_eval, const SolverConfig& cfg,
                     long err_dim = -1, IntegrateStats* stats = nullptr) {
  validate_solver(cfg);
  require(!t_eval.empty(), ErrorCode::InvalidArgument, "empty t_eval");
  for (size_t i = 1; i < t_eval.size(); ++i)
    require(t_eval[i] > t_eval[i - 1], ErrorCode::InvalidArgument,
            "t_eval must be strictly increasing");
  require(detail::all_finite(u0), ErrorCode::NonFiniteState, "non-finite initial state");

  const long dim = static_cast<long>(u0.size());
  Trajectory traj;
  traj.times.reserve(t_eval.size());
  traj.states.reserve(t_eval.size());
  traj.times.push_back(t_eval[0]);
  traj.states.push_back(u0);

  IntegrateStats local_stats;
  IntegrateStats& st = stats ? *stats : local_stats;

  std::vector<double> y = u0;
  double t = t_eval[0];

  if (cfg.method == Method::euler || cfg.method == Method::rk4) {
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), ytmp(dim);
    for (size_t ti = 1; ti < t_eval.size(); ++ti) {
      const double tt = t_eval[ti];
      const double span = tt - t;
      const long nsub = std::max<long>(1, static_cast<long>(std::ceil(span / cfg.h_init - 1e-9)));
      const double h = span / nsub;
      for (long s = 0; s < nsub; ++s) {
        require(++st.steps_accepted <= cfg.max_steps, ErrorCode::MaxStepsExceeded,
                "fixed-step budget exhausted");
        f(t, y, k1);
        ++st.rhs_evals;
        if (cfg.method == Method::euler) {
          for (long i = 0; i < dim; ++i) y[i] += h * k1[i];
        } else {
          for (long i = 0; i < dim; ++i) ytmp[i] = y[i] + 0.5 * h * k1[i];
          f(t + 0.5 * h, ytmp, k2);
          for (long i = 0; i < dim; ++i) ytmp[i] = y[i] + 0.5 * h * k2[i];
          f(t + 0.5 * h, ytmp, k3);
          for (long i = 0; i < dim; ++i) ytmp[i] = y[i] + h * k3[i];
          f(t + h, ytmp, k4);
          st.rhs_evals += 3;
          for (long i = 0; i < dim; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = (s + 1 == nsub) ? tt : t + h;
        require(detail::all_finite(y), ErrorCode::NonFiniteState,
                "state became non-finite at t=" + std::to_string(t));
      }
      traj.times.push_back(tt);
      traj.states.push_back(y);
    }
    return traj;
  }

  // Dormand-Prince 5(4) with FSAL and a PI step controller
  // (safety 0.9, step-change factors clamped to [0.2, 5]).
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
  std::vector<double> ytmp(dim), y1(dim), err(dim);

  f(t, y, k1);
  ++st.rhs_evals;
  require(detail::all_finite(k1), ErrorCode::NonFiniteState,
          "derivative non-finite at initial state");

  double h = std::clamp(cfg.h_init, cfg.h_min, cfg.h_max);
  double err_prev = 1e-4;
  int bad_streak = 0;

  for (size_t ti = 1; ti < t_eval.size(); ++ti) {
    const double tt = t_eval[ti];
    while (t < tt) {
      require(st.steps_accepted + st.steps_rejected < cfg.max_steps,
              ErrorCode::MaxStepsExceeded,
              "step budget exhausted at t=" + std::to_string(t));
      bool landing = false;
      double hs = std::min(h, cfg.h_max);
      if (t + hs >= tt) {
        hs = tt - t;
        landing = true;
      }

      for (long i = 0; i < dim; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
      f(t + hs / 5.0, ytmp, k2);
      for (long i = 0; i < dim; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      f(t + 3.0 * hs / 10.0, ytmp, k3);
      for (long i = 0; i < dim; ++i)
        ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      f(t + 4.0 * hs / 5.0, ytmp, k4);
      for (long i = 0; i < dim; ++i)
        ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      f(t + 8.0 * hs / 9.0, ytmp, k5);
      for (long i = 0; i < dim; ++i)
        ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                               a65 * k5[i]);
      f(t + hs, ytmp, k6);
      for (long i = 0; i < dim; ++i)
        y1[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                             b6 * k6[i]);
      f(t + hs, y1, k7);
      st.rhs_evals += 6;
      for (long i = 0; i < dim; ++i)
        err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                       e7 * k7[i]);

      const double enorm =
          detail::error_norm(err, y, y1, cfg.atol, cfg.rtol, err_dim);

      if (std::isfinite(enorm) && enorm <= 1.0 && detail::all_finite(y1)) {
        ++st.steps_accepted;
        bad_streak = 0;
        t = landing ? tt : t + hs;
        std::swap(y, y1);
        std::swap(k1, k7);  // FSAL
        const double e_clamped = std::max(enorm, 1e-16);
        double fac = 0.9 * std::pow(e_clamped, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
        fac = std::clamp(fac, 0.2, 5.0);
        h = std::clamp(hs * fac, cfg.h_min, cfg.h_max);
        err_prev = std::max(enorm, 1e-10);
      } else {
        ++st.steps_rejected;
        double fac = 0.2;
        if (std::isfinite(enorm) && enorm > 0.0)
          fac = std::max(0.2, 0.9 * std::pow(enorm, -0.2));
        if (!std::isfinite(enorm) || !detail::all_finite(y1)) {
          require(++bad_streak <= 12, ErrorCode::NonFiniteState,
                  "state repeatedly non-finite near t=" + std::to_string(t));
          fac = 0.2;
        }
        h = hs * fac;
        require(h >= cfg.h_min, ErrorCode::StepUnderflow,
                "step size underflow at t=" + std::to_string(t));
      }
    }
    traj.times.push_back(tt);
    traj.states.push_back(y);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Gradients of the observation-matching loss
//   L = 1/(M+1) * sum_i || u(t_i) - y_i ||^2
// for the MPNN differential, by the continuous adjoint method and by
// discretize-then-differentiate (fixed-step RK4), the latter serving as an
// independent gradient oracle.
// ---------------------------------------------------------------------------

struct AdjointStats {
  int checkpoint_count = 0;
  IntegrateStats forward;
  IntegrateStats backward;
};

struct GradientResult {
  double loss = 0.0;
  std::vector<double> grad_theta;
  AdjointStats stats;
};

namespace detail {

inline void check_obs(const Field& u0, const std::vector<double>& t_obs,
                      const std::vector<Field>& y_obs) {
  require(t_obs.size() >= 2, ErrorCode::InvalidArgument,
          "need at least two observation times");
  for (size_t i = 1; i < t_obs.size(); ++i)
    require(t_obs[i] > t_obs[i - 1], ErrorCode::InvalidArgument,
            "observation times must be strictly increasing");
  require(y_obs.size() == t_obs.size(), ErrorCode::ShapeMismatch,
          "observations/times length mismatch");
  for (const Field& y : y_obs)
    require(y.n == u0.n && y.d == u0.d, ErrorCode::ShapeMismatch,
            "observation shape mismatch");
}

}  // namespace detail

/// Continuous adjoint gradient. Forward pass checkpoints the state at every
/// observation time; the backward pass integrates (u, lambda, dL/dtheta)
/// together within each interval, re-seeding u from the checkpoint and adding
/// the residual jump 2/(M+1) * (u(t_i) - y_i) to lambda at each boundary.
/// Memory holds the M+1 checkpoints plus integrator workspace only. The
/// quadrature components are excluded from step-error control.
inline GradientResult adjoint_gradient(const geo::Graph& graph,
                                       const mpnn::SurrogateConfig& cfg,
                                       const std::vector<double>& params,
                                       const Field& u0,
                                       const std::vector<double>& t_obs,
                                       const std::vector<Field>& y_obs,
                                       const SolverConfig& solver,
                                       mpnn::Scratch* scratch = nullptr) {
  detail::check_obs(u0, t_obs, y_obs);
  mpnn::Scratch local;
  mpnn::Scratch& s = scratch ? *scratch : local;

  const int n = u0.n, d = u0.d;
  const long nd = static_cast<long>(n) * d;
  const long p = mpnn::param_count(cfg);
  const int m_plus_1 = static_cast<int>(t_obs.size());
  const double c = 1.0 / m_plus_1;

  GradientResult res;
  res.stats.checkpoint_count = m_plus_1;

  Field u_buf(n, d);
  Field du_buf;
  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    std::memcpy(u_buf.v.data(), y.data(), sizeof(double) * nd);
    du_buf = mpnn::eval_fhat(graph, u_buf, cfg, params, s);
    dy.resize(nd);
    std::memcpy(dy.data(), du_buf.v.data(), sizeof(double) * nd);
  };

  const Trajectory traj =
      integrate(rhs, u0.v, t_obs, solver, -1, &res.stats.forward);

  double loss = 0.0;
  for (int i = 0; i < m_plus_1; ++i) {
    for (long k = 0; k < nd; ++k) {
      const double r = traj.states[i][k] - y_obs[i].v[k];
      loss += r * r;
    }
  }
  res.loss = c * loss;

  // Backward sweep in flipped time s = t_i - t over each interval.
  std::vector<double> z(2 * nd + p, 0.0);
  Field lam_buf(n, d);
  Field ubar_buf;
  std::vector<double> tbar_buf;
  auto aug_rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    std::memcpy(u_buf.v.data(), y.data(), sizeof(double) * nd);
    std::memcpy(lam_buf.v.data(), y.data() + nd, sizeof(double) * nd);
    mpnn::fhat_eval_vjp(graph, u_buf, cfg, params, lam_buf, s, du_buf, ubar_buf,
                        tbar_buf);
    dy.resize(2 * nd + p);
    for (long k = 0; k < nd; ++k) dy[k] = -du_buf.v[k];
    std::memcpy(dy.data() + nd, ubar_buf.v.data(), sizeof(double) * nd);
    std::memcpy(dy.data() + 2 * nd, tbar_buf.data(), sizeof(double) * p);
  };

  for (int i = m_plus_1 - 1; i >= 1; --i) {
    std::memcpy(z.data(), traj.states[i].data(), sizeof(double) * nd);
    for (long k = 0; k < nd; ++k)
      z[nd + k] += 2.0 * c * (traj.states[i][k] - y_obs[i].v[k]);
    const std::vector<double> span{0.0, t_obs[i] - t_obs[i - 1]};
    const Trajectory back =
        integrate(aug_rhs, z, span, solver, 2 * nd, &res.stats.backward);
    z = back.states.back();
  }

  res.grad_theta.assign(z.begin() + 2 * nd, z.end());
  return res;
}

/// Exact gradient of the fixed-step RK4 discretization of the same loss.
/// Stores every stage state on the forward pass and reverse-sweeps with the
/// MPNN VJP; dt must divide each inter-observation interval within 1e-9.
inline GradientResult backprop_gradient(const geo::Graph& graph,
                                        const mpnn::SurrogateConfig& cfg,
                                        const std::vector<double>& params,
                                        const Field& u0,
                                        const std::vector<double>& t_obs,
                                        const std::vector<Field>& y_obs, double dt,
                                        mpnn::Scratch* scratch = nullptr) {
  detail::check_obs(u0, t_obs, y_obs);
  require(dt > 0, ErrorCode::InvalidArgument, "dt must be positive");
  mpnn::Scratch local;
  mpnn::Scratch& s = scratch ? *scratch : local;

  const int n = u0.n, d = u0.d;
  const long nd = static_cast<long>(n) * d;
  const int m_plus_1 = static_cast<int>(t_obs.size());
  const double c = 1.0 / m_plus_1;

  std::vector<long> steps_per_interval(m_plus_1 - 1);
  for (int i = 0; i + 1 < m_plus_1; ++i) {
    const double span = t_obs[i + 1] - t_obs[i];
    const long k = std::lround(span / dt);
    require(k >= 1 && std::abs(k * dt - span) <= 1e-9, ErrorCode::InvalidArgument,
            "dt does not divide observation interval " + std::to_string(i));
    steps_per_interval[i] = k;
  }

  struct Stage {
    Field u, k1, k2, k3, k4;
    double h;
  };
  std::vector<Stage> tape;
  std::vector<Field> at_obs(m_plus_1);

  Field u = u0;
  at_obs[0] = u;
  auto feval = [&](const Field& x) { return mpnn::eval_fhat(graph, x, cfg, params, s); };

  for (int i = 0; i + 1 < m_plus_1; ++i) {
    const double h = (t_obs[i + 1] - t_obs[i]) / steps_per_interval[i];
    for (long st = 0; st < steps_per_interval[i]; ++st) {
      Stage stage;
      stage.h = h;
      stage.u = u;
      stage.k1 = feval(u);
      Field tmp(n, d);
      for (long k = 0; k < nd; ++k) tmp.v[k] = u.v[k] + 0.5 * h * stage.k1.v[k];
      stage.k2 = feval(tmp);
      for (long k = 0; k < nd; ++k) tmp.v[k] = u.v[k] + 0.5 * h * stage.k2.v[k];
      stage.k3 = feval(tmp);
      for (long k = 0; k < nd; ++k) tmp.v[k] = u.v[k] + h * stage.k3.v[k];
      stage.k4 = feval(tmp);
      for (long k = 0; k < nd; ++k)
        u.v[k] += h / 6.0 *
                  (stage.k1.v[k] + 2.0 * stage.k2.v[k] + 2.0 * stage.k3.v[k] +
                   stage.k4.v[k]);
      require(u.all_finite(), ErrorCode::NonFiniteState,
              "state became non-finite during forward RK4");
      tape.push_back(std::move(stage));
    }
    at_obs[i + 1] = u;
  }

  GradientResult res;
  double loss = 0.0;
  for (int i = 0; i < m_plus_1; ++i)
    for (long k = 0; k < nd; ++k) {
      const double r = at_obs[i].v[k] - y_obs[i].v[k];
      loss += r * r;
    }
  res.loss = c * loss;
  res.stats.checkpoint_count = m_plus_1;

  std::vector<double> theta_bar(params.size(), 0.0);
  std::vector<double> tb_stage;
  Field ubar(n, d, 0.0), cot(n, d), sbar, tmp(n, d);

  long tape_pos = static_cast<long>(tape.size());
  for (int i = m_plus_1 - 1; i >= 1; --i) {
    for (long k = 0; k < nd; ++k)
      ubar.v[k] += 2.0 * c * (at_obs[i].v[k] - y_obs[i].v[k]);
    for (long st = 0; st < steps_per_interval[i - 1]; ++st) {
      const Stage& g = tape[--tape_pos];
      const double h = g.h;
      // kbar weights from u_{n+1} = u_n + h/6 (k1 + 2k2 + 2k3 + k4)
      Field k1b(n, d), k2b(n, d), k3b(n, d), k4b(n, d);
      for (long k = 0; k < nd; ++k) {
        k1b.v[k] = h / 6.0 * ubar.v[k];
        k2b.v[k] = h / 3.0 * ubar.v[k];
        k3b.v[k] = h / 3.0 * ubar.v[k];
        k4b.v[k] = h / 6.0 * ubar.v[k];
      }
      // k4 = f(u + h k3)
      for (long k = 0; k < nd; ++k) tmp.v[k] = g.u.v[k] + h * g.k3.v[k];
      mpnn::fhat_eval_vjp(graph, tmp, cfg, params, k4b, s, cot, sbar, tb_stage);
      for (size_t q = 0; q < theta_bar.size(); ++q) theta_bar[q] += tb_stage[q];
      for (long k = 0; k < nd; ++k) {
        ubar.v[k] += sbar.v[k];
        k3b.v[k] += h * sbar.v[k];
      }
      // k3 = f(u + h/2 k2)
      for (long k = 0; k < nd; ++k) tmp.v[k] = g.u.v[k] + 0.5 * h * g.k2.v[k];
      mpnn::fhat_eval_vjp(graph, tmp, cfg, params, k3b, s, cot, sbar, tb_stage);
      for (size_t q = 0; q < theta_bar.size(); ++q) theta_bar[q] += tb_stage[q];
      for (long k = 0; k < nd; ++k) {
        ubar.v[k] += sbar.v[k];
        k2b.v[k] += 0.5 * h * sbar.v[k];
      }
      // k2 = f(u + h/2 k1)
      for (long k = 0; k < nd; ++k) tmp.v[k] = g.u.v[k] + 0.5 * h * g.k1.v[k];
      mpnn::fhat_eval_vjp(graph, tmp, cfg, params, k2b, s, cot, sbar, tb_stage);
      for (size_t q = 0; q < theta_bar.size(); ++q) theta_bar[q] += tb_stage[q];
      for (long k = 0; k < nd; ++k) {
        ubar.v[k] += sbar.v[k];
        k1b.v[k] += 0.5 * h * sbar.v[k];
      }
      // k1 = f(u)
      mpnn::fhat_eval_vjp(graph, g.u, cfg, params, k1b, s, cot, sbar, tb_stage);
      for (size_t q = 0; q < theta_bar.size(); ++q) theta_bar[q] += tb_stage[q];
      for (long k = 0; k < nd; ++k) ubar.v[k] += sbar.v[k];
    }
  }
  res.grad_theta = std::move(theta_bar);
  return res;
}

}  // namespace graphpde::ode
