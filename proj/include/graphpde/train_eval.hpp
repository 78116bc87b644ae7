#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "graphpde/datagen.hpp"
#include "graphpde/errors.hpp"
#include "graphpde/field.hpp"
#include "graphpde/geometry.hpp"
#include "graphpde/mpnn.hpp"
#include "graphpde/odeint.hpp"
#include "graphpde/parallel.hpp"
#include "graphpde/rprop.hpp"

// Training loop, loss and relative-error metrics, and the experiment runners
// for the ablation and cross-grid studies.

namespace graphpde::train {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mean squared error over observation times: 1/(M+1) sum_i ||u_i - y_i||^2.
/// The t_0 residual is zero by construction when predictions start from the
/// observed initial state.
inline double mse_loss(const ode::Trajectory& pred, const datagen::SimulationRecord& obs) {
  require(pred.times.size() == obs.times.size(), ErrorCode::TimeMisalignment,
          "trajectory/observation time counts differ");
  for (size_t i = 0; i < pred.times.size(); ++i)
    require(std::abs(pred.times[i] - obs.times[i]) <= 1e-9, ErrorCode::TimeMisalignment,
            "trajectory/observation times differ at index " + std::to_string(i));
  const int m_plus_1 = static_cast<int>(obs.times.size());
  double acc = 0.0;
  for (int i = 0; i < m_plus_1; ++i) {
    require(pred.states[i].size() == obs.states[i].v.size(), ErrorCode::ShapeMismatch,
            "state size mismatch");
    for (size_t k = 0; k < pred.states[i].size(); ++k) {
      const double r = pred.states[i][k] - obs.states[i].v[k];
      acc += r * r;
    }
  }
  return acc / m_plus_1;
}

/// ||y - u|| / ||y|| over all node/state entries. For two-component states
/// (Burgers) both fields are reduced to per-node velocity magnitudes first.
inline double relative_error(const Field& pred, const Field& obs, bool magnitude_of_d2) {
  require_same_shape(pred, obs);
  double num = 0.0, den = 0.0;
  if (magnitude_of_d2 && obs.d == 2) {
    for (int i = 0; i < obs.n; ++i) {
      const double mp = std::hypot(pred.at(i, 0), pred.at(i, 1));
      const double mo = std::hypot(obs.at(i, 0), obs.at(i, 1));
      num += (mo - mp) * (mo - mp);
      den += mo * mo;
    }
  } else {
    for (size_t k = 0; k < obs.v.size(); ++k) {
      const double r = obs.v[k] - pred.v[k];
      num += r * r;
      den += obs.v[k] * obs.v[k];
    }
  }
  require(den > 0.0, ErrorCode::ZeroReference, "reference state has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class GradMode { adjoint, backprop };

struct TrainConfig {
  int iterations = 5000;
  GradMode mode = GradMode::adjoint;
  ode::SolverConfig solver;           // used by both passes of the adjoint
  double backprop_dt = 1e-3;          // fixed RK4 step for GradMode::backprop
  std::vector<int> batch;             // simulation indices; empty = all
  std::uint64_t seed = 0;
  int stagnation_window = 500;
  double stagnation_eps = 1e-10;
  nn::RpropConfig rprop;
  int threads = 0;  // 0: hardware concurrency
};

struct TrainReport {
  std::vector<double> loss_history;  // batch-summed loss per iteration
  std::vector<double> wall_ms;       // cumulative wall clock at each iteration
  int iterations_run = 0;
  bool early_stopped = false;
};

struct Model {
  mpnn::SurrogateConfig cfg;
  std::vector<double> params;
};

inline Field initial_state(const datagen::SimulationRecord& rec) {
  return rec.states.front();
}

/// Full-batch Rprop training. Per iteration every batch simulation
/// contributes (loss, grad) through the configured gradient mode; gradients
/// are summed in simulation-index order (bitwise deterministic regardless of
/// thread scheduling) and one optimizer step is applied.
inline TrainReport fit(const datagen::Dataset& data, Model& model, const TrainConfig& tc) {
  require(!data.sims.empty(), ErrorCode::InvalidArgument, "empty dataset");
  require(tc.iterations > 0, ErrorCode::InvalidArgument, "iteration budget must be > 0");
  const int d = datagen::state_dim(data.equation.kind);
  require(model.cfg.state_dim == d, ErrorCode::ShapeMismatch,
          "model state_dim does not match dataset");

  std::vector<int> batch = tc.batch;
  if (batch.empty()) {
    batch.resize(data.sims.size());
    for (size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<int>(i);
  }
  for (int b : batch)
    require(b >= 0 && b < static_cast<int>(data.sims.size()), ErrorCode::InvalidArgument,
            "batch index out of range");

  // One graph per simulation, built once (positions are constant in time).
  std::vector<geo::Graph> graphs(batch.size());
  parallel_for(static_cast<int>(batch.size()), [&](int k, int) {
    const auto& rec = data.sims[batch[k]];
    geo::PointSet ps;
    ps.coords = rec.coords;
    ps.domain_lo = data.equation.domain_lo;
    ps.domain_hi = data.equation.domain_hi;
    graphs[k] = geo::build_graph(ps);
  }, tc.threads);

  const int nb = static_cast<int>(batch.size());
  std::vector<double> losses(nb);
  std::vector<std::vector<double>> grads(nb);
  std::vector<mpnn::Scratch> scratch(effective_threads(tc.threads, nb));

  nn::RpropState opt(static_cast<long>(model.params.size()), tc.rprop);
  TrainReport report;
  report.loss_history.reserve(tc.iterations);
  report.wall_ms.reserve(tc.iterations);
  const auto t_start = std::chrono::steady_clock::now();

  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<double> grad_sum(model.params.size());

  for (int iter = 0; iter < tc.iterations; ++iter) {
    parallel_for(nb, [&](int k, int worker) {
      const auto& rec = data.sims[batch[k]];
      ode::GradientResult gr;
      if (tc.mode == GradMode::adjoint) {
        gr = ode::adjoint_gradient(graphs[k], model.cfg, model.params,
                                   initial_state(rec), rec.times, rec.states, tc.solver,
                                   &scratch[worker]);
      } else {
        gr = ode::backprop_gradient(graphs[k], model.cfg, model.params,
                                    initial_state(rec), rec.times, rec.states,
                                    tc.backprop_dt, &scratch[worker]);
      }
      losses[k] = gr.loss;
      grads[k] = std::move(gr.grad_theta);
    }, tc.threads);

    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    double loss_sum = 0.0;
    for (int k = 0; k < nb; ++k) {
      loss_sum += losses[k];
      for (size_t q = 0; q < grad_sum.size(); ++q) grad_sum[q] += grads[k][q];
    }
    nn::rprop_step(opt, model.params, grad_sum);

    report.loss_history.push_back(loss_sum);
    report.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t_start)
            .count());
    report.iterations_run = iter + 1;

    if (loss_sum < best_loss - tc.stagnation_eps) {
      best_loss = loss_sum;
      since_best = 0;
    } else if (++since_best >= tc.stagnation_window) {
      report.early_stopped = true;
      break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
  std::vector<std::vector<double>> rel_errors;  // [sim][time]
  std::vector<std::vector<double>> times;       // [sim][time]
  double mean_rel_error = 0.0;
  double wall_ms = 0.0;
};

/// Rolls the model out from y(t_0) of every simulation and scores the
/// relative error at each observation time. Never mutates the model.
inline EvalReport evaluate(const datagen::Dataset& data, const Model& model,
                           const ode::SolverConfig& solver, int threads = 0) {
  require(!data.sims.empty(), ErrorCode::InvalidArgument, "empty dataset");
  const int d = datagen::state_dim(data.equation.kind);
  require(model.cfg.state_dim == d, ErrorCode::ShapeMismatch,
          "model state_dim does not match dataset");
  const bool magnitude = data.equation.kind == datagen::PdeKind::burgers;

  const auto t_start = std::chrono::steady_clock::now();
  const int ns = static_cast<int>(data.sims.size());
  EvalReport rep;
  rep.rel_errors.resize(ns);
  rep.times.resize(ns);

  parallel_for(ns, [&](int si, int) {
    const auto& rec = data.sims[si];
    geo::PointSet ps;
    ps.coords = rec.coords;
    ps.domain_lo = data.equation.domain_lo;
    ps.domain_hi = data.equation.domain_hi;
    const geo::Graph graph = geo::build_graph(ps);
    mpnn::Scratch scratch;
    Field u_buf(rec.n_nodes(), d);
    Field du;
    auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
      std::copy(y.begin(), y.end(), u_buf.v.begin());
      du = mpnn::eval_fhat(graph, u_buf, model.cfg, model.params, scratch);
      dy = du.v;
    };
    const ode::Trajectory traj =
        ode::integrate(rhs, rec.states.front().v, rec.times, solver);
    rep.times[si] = rec.times;
    rep.rel_errors[si].resize(rec.n_times());
    Field pred(rec.n_nodes(), d);
    for (int ti = 0; ti < rec.n_times(); ++ti) {
      pred.v = traj.states[ti];
      rep.rel_errors[si][ti] = relative_error(pred, rec.states[ti], magnitude);
    }
  }, threads);

  double acc = 0.0;
  long cnt = 0;
  for (const auto& sim : rep.rel_errors)
    for (double e : sim) {
      acc += e;
      ++cnt;
    }
  rep.mean_rel_error = acc / cnt;
  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t_start)
                    .count();
  return rep;
}

/// Appendix-F style matrix: entry (g, m) is the mean relative error of model
/// m evaluated on dataset g.
inline std::vector<std::vector<double>> cross_grid_eval(
    const std::vector<Model>& models, const std::vector<datagen::Dataset>& datasets,
    const ode::SolverConfig& solver) {
  std::vector<std::vector<double>> matrix(datasets.size(),
                                          std::vector<double>(models.size()));
  for (size_t g = 0; g < datasets.size(); ++g)
    for (size_t m = 0; m < models.size(); ++m)
      matrix[g][m] = evaluate(datasets[g], models[m], solver).mean_rel_error;
  return matrix;
}

// ---------------------------------------------------------------------------
// Ablation runners
// ---------------------------------------------------------------------------

enum class AblationKind {
  grid_size,
  time_step,
  irregular_time,
  data_amount,
  noise,
  edge_features,
};

struct AblationConfig {
  datagen::GenerateOptions gen;      // base dataset settings (training)
  int test_sims = 10;
  std::uint64_t test_seed_offset = 1000003;  // test stream never collides
  mpnn::SurrogateConfig model;
  TrainConfig train;
  ode::SolverConfig eval_solver;
};

struct AblationRun {
  std::string label;
  double final_train_loss = 0.0;
  double mean_rel_error = 0.0;
  int iterations_run = 0;
};

struct AblationReport {
  AblationKind kind;
  std::vector<AblationRun> runs;
};

namespace detail {

inline AblationRun run_one(const AblationConfig& base, const std::string& label,
                           const datagen::GenerateOptions& gen_train,
                           const datagen::GenerateOptions& gen_test,
                           const mpnn::SurrogateConfig& mcfg) {
  const datagen::Dataset train_ds = datagen::generate_dataset(gen_train);
  const datagen::Dataset test_ds = datagen::generate_dataset(gen_test);
  Model model{mcfg, mpnn::init_params(mcfg, base.train.seed)};
  const TrainReport tr = fit(train_ds, model, base.train);
  const EvalReport ev = evaluate(test_ds, model, base.eval_solver);
  AblationRun run;
  run.label = label;
  run.final_train_loss = tr.loss_history.empty() ? 0.0 : tr.loss_history.back();
  run.mean_rel_error = ev.mean_rel_error;
  run.iterations_run = tr.iterations_run;
  return run;
}

}  // namespace detail

/// Orchestrates dataset generation, training, and evaluation along one
/// ablation axis at desk scale.
inline AblationReport run_ablation(AblationKind kind, const AblationConfig& base) {
  AblationReport rep;
  rep.kind = kind;

  auto test_gen = [&](const datagen::GenerateOptions& g) {
    datagen::GenerateOptions t = g;
    t.sims = base.test_sims;
    t.seed = g.seed + base.test_seed_offset;
    t.noise_sigma = 0.0;  // noise applies to training data only
    return t;
  };

  switch (kind) {
    case AblationKind::grid_size: {
      for (int nodes : {500, 250, 125}) {
        datagen::GenerateOptions g = base.gen;
        g.nodes = nodes;
        rep.runs.push_back(detail::run_one(base, std::to_string(nodes) + " nodes", g,
                                           test_gen(g), base.model));
      }
      break;
    }
    case AblationKind::time_step: {
      for (double dt : {0.02, 0.05, 0.1}) {
        datagen::GenerateOptions g = base.gen;
        g.dt = dt;
        rep.runs.push_back(detail::run_one(base, "dt=" + std::to_string(dt), g,
                                           test_gen(g), base.model));
      }
      break;
    }
    case AblationKind::irregular_time: {
      datagen::GenerateOptions regular = base.gen;
      regular.time_jitter = 0.0;
      datagen::GenerateOptions irregular = base.gen;
      irregular.time_jitter = 0.02 / 6.0;
      rep.runs.push_back(
          detail::run_one(base, "regular", regular, test_gen(regular), base.model));
      rep.runs.push_back(detail::run_one(base, "irregular", irregular,
                                         test_gen(regular), base.model));
      break;
    }
    case AblationKind::data_amount: {
      for (int sims : {1, 5, 10, base.gen.sims}) {
        datagen::GenerateOptions g = base.gen;
        g.sims = sims;
        rep.runs.push_back(detail::run_one(base, std::to_string(sims) + " sims", g,
                                           test_gen(base.gen), base.model));
      }
      break;
    }
    case AblationKind::noise: {
      for (double sigma : {0.0, 0.01, 0.02, 0.04}) {
        datagen::GenerateOptions g = base.gen;
        g.noise_sigma = sigma;
        rep.runs.push_back(detail::run_one(base, "sigma=" + std::to_string(sigma), g,
                                           test_gen(g), base.model));
      }
      break;
    }
    case AblationKind::edge_features: {
      mpnn::SurrogateConfig on = base.model;
      on.use_edge_features = true;
      mpnn::SurrogateConfig off = base.model;
      off.use_edge_features = false;
      rep.runs.push_back(detail::run_one(base, "edge_features=on", base.gen,
                                         test_gen(base.gen), on));
      rep.runs.push_back(detail::run_one(base, "edge_features=off", base.gen,
                                         test_gen(base.gen), off));
      break;
    }
  }
  return rep;
}

}  // namespace graphpde::train
