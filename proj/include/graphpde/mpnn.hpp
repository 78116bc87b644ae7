#pragma once

#include <algorithm>
#include <vector>

#include "graphpde/errors.hpp"
#include "graphpde/field.hpp"
#include "graphpde/geometry.hpp"
#include "graphpde/mlp.hpp"
#include "graphpde/rng.hpp"

// The learned differential: one message-passing layer over the Delaunay graph.
// For node i with state u_i,
//   m_i   = mean_{j in N(i)} phi(u_i, u_j - u_i, x_j - x_i)
//   du_i  = gamma(u_i, m_i)
// and the edge-displacement inputs drop out when use_edge_features is off.
//
// Neighbor messages are summed per output component in ascending value order.
// The sum of a multiset of doubles is then independent of node labeling, so
// relabeling nodes permutes the output bit-exactly (an index-ordered sum would
// not: float addition is not associative).

namespace graphpde::mpnn {

struct SurrogateConfig {
  int state_dim = 1;
  int message_dim = 40;
  int hidden_width = 60;
  int hidden_layers = 3;
  int graph_layers = 1;  // K; the experiments in scope all use 1
  bool use_edge_features = true;
};

inline void validate_config(const SurrogateConfig& cfg) {
  require(cfg.state_dim >= 1 && cfg.message_dim >= 1 && cfg.hidden_width >= 1,
          ErrorCode::InvalidArgument, "bad surrogate dimensions");
  require(cfg.hidden_layers == 3, ErrorCode::InvalidArgument,
          "only 3 hidden layers supported");
  require(cfg.graph_layers == 1, ErrorCode::InvalidArgument,
          "only a single graph layer (K=1) is supported");
}

inline nn::MlpSpec phi_spec(const SurrogateConfig& cfg) {
  const int in = 2 * cfg.state_dim + (cfg.use_edge_features ? 2 : 0);
  return nn::MlpSpec{{in, cfg.hidden_width, cfg.hidden_width, cfg.hidden_width,
                      cfg.message_dim}};
}

inline nn::MlpSpec gamma_spec(const SurrogateConfig& cfg) {
  return nn::MlpSpec{{cfg.state_dim + cfg.message_dim, cfg.hidden_width,
                      cfg.hidden_width, cfg.hidden_width, cfg.state_dim}};
}

inline long param_count(const SurrogateConfig& cfg) {
  return nn::param_count(phi_spec(cfg)) + nn::param_count(gamma_spec(cfg));
}

inline std::vector<double> init_params(const SurrogateConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  std::vector<double> params(param_count(cfg));
  Rng rphi(mix_seed(seed, 0)), rgamma(mix_seed(seed, 1));
  nn::init_params(phi_spec(cfg), rphi, params.data());
  nn::init_params(gamma_spec(cfg), rgamma, params.data() + nn::param_count(phi_spec(cfg)));
  return params;
}

/// Reusable buffers; one per thread in hot loops. Holds no semantic state.
struct Scratch {
  nn::MlpWorkspace phi_ws, gamma_ws;
  std::vector<double> gamma_xbar;
  std::vector<double> phi_ybar;
  std::vector<double> sortbuf;
};

namespace detail {

inline void check_args(const geo::Graph& graph, const Field& u,
                       const SurrogateConfig& cfg, const std::vector<double>& params) {
  validate_config(cfg);
  require(graph.n_nodes > 0, ErrorCode::EmptyGraph, "graph has no nodes");
  require(u.n == graph.n_nodes, ErrorCode::ShapeMismatch,
          "state/node count mismatch");
  require(u.d == cfg.state_dim, ErrorCode::ShapeMismatch, "state dim mismatch");
  require(static_cast<long>(params.size()) == param_count(cfg),
          ErrorCode::ShapeMismatch, "parameter count mismatch");
}

/// Sum of k doubles in ascending value order (insertion sort; degrees are
/// small). Result depends only on the multiset of values.
inline double ordered_sum(double* buf, int k) {
  for (int a = 1; a < k; ++a) {
    const double x = buf[a];
    int b = a - 1;
    while (b >= 0 && buf[b] > x) {
      buf[b + 1] = buf[b];
      --b;
    }
    buf[b + 1] = x;
  }
  double s = 0.0;
  for (int a = 0; a < k; ++a) s += buf[a];
  return s;
}

/// Forward pass; fills scratch workspaces and writes du into `out`.
inline void forward(const geo::Graph& graph, const Field& u, const SurrogateConfig& cfg,
                    const std::vector<double>& params, Scratch& s, Field& out) {
  const int n = graph.n_nodes;
  const int d = cfg.state_dim;
  const int msg = cfg.message_dim;
  const int e = graph.n_directed_edges();
  const nn::MlpSpec phi = phi_spec(cfg);
  const nn::MlpSpec gamma = gamma_spec(cfg);
  const int phi_in = phi.input_size();

  s.phi_ws.ensure(phi, e);
  s.gamma_ws.ensure(gamma, n);

  // Edge inputs in CSR order: (u_i, u_j - u_i [, x_j - x_i]).
  double* xe = s.phi_ws.acts[0].data();
  for (int i = 0; i < n; ++i) {
    const double* ui = u.row(i);
    for (int k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
      const int j = graph.neighbors[k];
      const double* uj = u.row(j);
      double* row = xe + static_cast<long>(k) * phi_in;
      for (int c = 0; c < d; ++c) row[c] = ui[c];
      for (int c = 0; c < d; ++c) row[d + c] = uj[c] - ui[c];
      if (cfg.use_edge_features) {
        row[2 * d] = graph.edge_dx[k];
        row[2 * d + 1] = graph.edge_dy[k];
      }
    }
  }
  nn::forward_batched(phi, params.data(), s.phi_ws, e);

  // Aggregate messages (value-ordered mean) and build gamma inputs.
  const double* msgs = s.phi_ws.acts[phi.n_layers()].data();
  double* xn = s.gamma_ws.acts[0].data();
  int max_deg = 0;
  for (int i = 0; i < n; ++i) max_deg = std::max(max_deg, graph.degree(i));
  s.sortbuf.resize(std::max(max_deg, 1));
  for (int i = 0; i < n; ++i) {
    double* row = xn + static_cast<long>(i) * (d + msg);
    const double* ui = u.row(i);
    for (int c = 0; c < d; ++c) row[c] = ui[c];
    const int k0 = graph.offsets[i], deg = graph.offsets[i + 1] - graph.offsets[i];
    for (int c = 0; c < msg; ++c) {
      for (int a = 0; a < deg; ++a)
        s.sortbuf[a] = msgs[static_cast<long>(k0 + a) * msg + c];
      row[d + c] = (deg > 0) ? ordered_sum(s.sortbuf.data(), deg) / deg : 0.0;
    }
  }
  nn::forward_batched(gamma, params.data() + nn::param_count(phi), s.gamma_ws, n);

  out.n = n;
  out.d = d;
  out.v.assign(s.gamma_ws.acts[gamma.n_layers()].begin(),
               s.gamma_ws.acts[gamma.n_layers()].end());
}

/// Reverse sweep; requires workspaces filled by forward() for the same inputs.
/// Adds nothing to u_bar/theta_bar beyond overwrite/accumulate as noted.
inline void backward(const geo::Graph& graph, const Field& u, const SurrogateConfig& cfg,
                     const std::vector<double>& params, Scratch& s, const Field& cot,
                     Field& u_bar, std::vector<double>& theta_bar) {
  const int n = graph.n_nodes;
  const int d = cfg.state_dim;
  const int msg = cfg.message_dim;
  const int e = graph.n_directed_edges();
  const nn::MlpSpec phi = phi_spec(cfg);
  const nn::MlpSpec gamma = gamma_spec(cfg);
  const int phi_in = phi.input_size();
  const long phi_params = nn::param_count(phi);

  u_bar.n = n;
  u_bar.d = d;
  u_bar.v.assign(static_cast<size_t>(n) * d, 0.0);
  theta_bar.assign(params.size(), 0.0);

  // gamma backward: cotangent w.r.t. (u_i, m_i) rows.
  s.gamma_xbar.resize(static_cast<long>(n) * (d + msg));
  nn::vjp_batched(gamma, params.data() + phi_params, s.gamma_ws, n, cot.v.data(),
                  s.gamma_xbar.data(), theta_bar.data() + phi_params);

  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      u_bar.at(i, c) += s.gamma_xbar[static_cast<long>(i) * (d + msg) + c];

  // Mean backward: each edge message of node i receives mbar_i / deg_i.
  s.phi_ybar.resize(static_cast<long>(e) * msg);
  for (int i = 0; i < n; ++i) {
    const int k0 = graph.offsets[i], k1 = graph.offsets[i + 1];
    const int deg = k1 - k0;
    const double* mbar = s.gamma_xbar.data() + static_cast<long>(i) * (d + msg) + d;
    for (int k = k0; k < k1; ++k) {
      double* row = s.phi_ybar.data() + static_cast<long>(k) * msg;
      for (int c = 0; c < msg; ++c) row[c] = mbar[c] / deg;
    }
  }

  // phi backward: cotangents w.r.t. edge input rows, then scatter to nodes.
  std::vector<double>& xbar = s.gamma_xbar;  // reuse; resized below
  xbar.resize(static_cast<long>(e) * phi_in);
  nn::vjp_batched(phi, params.data(), s.phi_ws, e, s.phi_ybar.data(), xbar.data(),
                  theta_bar.data());
  for (int i = 0; i < n; ++i) {
    for (int k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
      const int j = graph.neighbors[k];
      const double* row = xbar.data() + static_cast<long>(k) * phi_in;
      for (int c = 0; c < d; ++c) {
        u_bar.at(i, c) += row[c] - row[d + c];
        u_bar.at(j, c) += row[d + c];
      }
    }
  }
}

}  // namespace detail

/// du/dt = F_theta(u) over the graph.
inline Field eval_fhat(const geo::Graph& graph, const Field& u,
                       const SurrogateConfig& cfg, const std::vector<double>& params,
                       Scratch& scratch) {
  detail::check_args(graph, u, cfg, params);
  Field out;
  detail::forward(graph, u, cfg, params, scratch, out);
  return out;
}

inline Field eval_fhat(const geo::Graph& graph, const Field& u,
                       const SurrogateConfig& cfg, const std::vector<double>& params) {
  Scratch scratch;
  return eval_fhat(graph, u, cfg, params, scratch);
}

struct FhatVjp {
  Field u_bar;
  std::vector<double> theta_bar;
};

/// Vector-Jacobian products (cot^T dF/du, cot^T dF/dtheta).
inline FhatVjp fhat_vjp(const geo::Graph& graph, const Field& u,
                        const SurrogateConfig& cfg, const std::vector<double>& params,
                        const Field& cot, Scratch& scratch) {
  detail::check_args(graph, u, cfg, params);
  require(cot.n == u.n && cot.d == u.d, ErrorCode::ShapeMismatch,
          "cotangent shape mismatch");
  Field out;
  detail::forward(graph, u, cfg, params, scratch, out);
  FhatVjp r;
  detail::backward(graph, u, cfg, params, scratch, cot, r.u_bar, r.theta_bar);
  return r;
}

inline FhatVjp fhat_vjp(const geo::Graph& graph, const Field& u,
                        const SurrogateConfig& cfg, const std::vector<double>& params,
                        const Field& cot) {
  Scratch scratch;
  return fhat_vjp(graph, u, cfg, params, cot, scratch);
}

/// Fused primal + VJP; shares the forward pass (the adjoint backward sweep
/// needs both du/dt and the products at every stage).
inline void fhat_eval_vjp(const geo::Graph& graph, const Field& u,
                          const SurrogateConfig& cfg, const std::vector<double>& params,
                          const Field& cot, Scratch& scratch, Field& out, Field& u_bar,
                          std::vector<double>& theta_bar) {
  detail::check_args(graph, u, cfg, params);
  require(cot.n == u.n && cot.d == u.d, ErrorCode::ShapeMismatch,
          "cotangent shape mismatch");
  detail::forward(graph, u, cfg, params, scratch, out);
  detail::backward(graph, u, cfg, params, scratch, cot, u_bar, theta_bar);
}

}  // namespace graphpde::mpnn
