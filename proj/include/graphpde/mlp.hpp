#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "graphpde/errors.hpp"
#include "graphpde/fastmath.hpp"
#include "graphpde/rng.hpp"

// Dense multilayer perceptrons with tanh hidden layers and an identity output
// layer, plus the reverse-mode products the adjoint training path needs.
//
// Parameter layout (shared with the checkpoint format): for each layer,
// weights stored input-major as WT[k * out + o] (the transpose of the usual
// out-by-in matrix), followed by the `out` biases. Batched kernels compute
// each row independently with explicit fma, so a row's bits never depend on
// which other rows share the batch.

namespace graphpde::nn {

struct MlpSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output

  int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
};

inline void validate_spec(const MlpSpec& spec) {
  require(spec.layer_sizes.size() >= 2, ErrorCode::InvalidArgument,
          "MLP needs at least input and output layers");
  for (int s : spec.layer_sizes)
    require(s > 0, ErrorCode::InvalidArgument, "layer size must be positive");
}

inline long param_count(const MlpSpec& spec) {
  long n = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_sizes.size()); ++l)
    n += static_cast<long>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1] +
         spec.layer_sizes[l + 1];
  return n;
}

inline long param_count(const std::vector<MlpSpec>& specs) {
  long n = 0;
  for (const auto& s : specs) n += param_count(s);
  return n;
}

/// Glorot-uniform weights, zero biases, written in storage order.
inline void init_params(const MlpSpec& spec, Rng& rng, double* params) {
  long off = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    const double s = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < in * out; ++k) params[off + k] = rng.uniform(-s, s);
    off += static_cast<long>(in) * out;
    for (int o = 0; o < out; ++o) params[off + o] = 0.0;
    off += out;
  }
}

namespace kernels {

// Row results never depend on which other rows share the batch: each output
// element is one fma chain over the row's own inputs in a fixed order. The
// WIDTH-templated paths exist so the per-row accumulator fully unrolls into
// vector registers (the widths below cover every layer this project builds).

template <int OUT>
void forward_rows(const double* __restrict x, const double* __restrict wt,
                  const double* __restrict b, double* __restrict y, int rows, int in) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<long>(r) * in;
    double* yr = y + static_cast<long>(r) * OUT;
    double acc[OUT];
#pragma GCC unroll 64
    for (int o = 0; o < OUT; ++o) acc[o] = b[o];
    for (int k = 0; k < in; ++k) {
      const double xk = xr[k];
      const double* wk = wt + static_cast<long>(k) * OUT;
#pragma GCC unroll 64
      for (int o = 0; o < OUT; ++o) acc[o] = std::fma(xk, wk[o], acc[o]);
    }
#pragma GCC unroll 64
    for (int o = 0; o < OUT; ++o) yr[o] = acc[o];
  }
}

inline void forward_rows_generic(const double* __restrict x, const double* __restrict wt,
                                 const double* __restrict b, double* __restrict y,
                                 int rows, int in, int out) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<long>(r) * in;
    double* yr = y + static_cast<long>(r) * out;
    std::memcpy(yr, b, sizeof(double) * out);
    for (int k = 0; k < in; ++k) {
      const double xk = xr[k];
      const double* wk = wt + static_cast<long>(k) * out;
      for (int o = 0; o < out; ++o) yr[o] = std::fma(xk, wk[o], yr[o]);
    }
  }
}

/// Y[r,:] = X[r,:] @ WT + b for B rows. WT is in-major (in x out).
inline void linear_forward(const double* x, const double* wt, const double* b,
                           double* y, int rows, int in, int out) {
  switch (out) {
    case 60: forward_rows<60>(x, wt, b, y, rows, in); break;
    case 40: forward_rows<40>(x, wt, b, y, rows, in); break;
    case 2: forward_rows<2>(x, wt, b, y, rows, in); break;
    case 1: forward_rows<1>(x, wt, b, y, rows, in); break;
    default: forward_rows_generic(x, wt, b, y, rows, in, out);
  }
}

template <int IN>
void backward_input_rows(const double* __restrict ybar, const double* __restrict w,
                         double* __restrict xbar, int rows, int out) {
  for (int r = 0; r < rows; ++r) {
    const double* gr = ybar + static_cast<long>(r) * out;
    double* xr = xbar + static_cast<long>(r) * IN;
    double acc[IN];
#pragma GCC unroll 64
    for (int k = 0; k < IN; ++k) acc[k] = 0.0;
    for (int o = 0; o < out; ++o) {
      const double go = gr[o];
      const double* wo = w + static_cast<long>(o) * IN;
#pragma GCC unroll 64
      for (int k = 0; k < IN; ++k) acc[k] = std::fma(go, wo[k], acc[k]);
    }
#pragma GCC unroll 64
    for (int k = 0; k < IN; ++k) xr[k] = acc[k];
  }
}

inline void backward_input_generic(const double* __restrict ybar,
                                   const double* __restrict w, double* __restrict xbar,
                                   int rows, int in, int out) {
  for (int r = 0; r < rows; ++r) {
    const double* gr = ybar + static_cast<long>(r) * out;
    double* xr = xbar + static_cast<long>(r) * in;
    for (int k = 0; k < in; ++k) xr[k] = 0.0;
    for (int o = 0; o < out; ++o) {
      const double go = gr[o];
      const double* wo = w + static_cast<long>(o) * in;
      for (int k = 0; k < in; ++k) xr[k] = std::fma(go, wo[k], xr[k]);
    }
  }
}

/// Xbar[r,:] = Ybar[r,:] @ W. W is the out-major copy (out x in).
inline void linear_backward_input(const double* ybar, const double* w, double* xbar,
                                  int rows, int in, int out) {
  switch (in) {
    case 60: backward_input_rows<60>(ybar, w, xbar, rows, out); break;
    case 42: backward_input_rows<42>(ybar, w, xbar, rows, out); break;
    case 41: backward_input_rows<41>(ybar, w, xbar, rows, out); break;
    case 6: backward_input_rows<6>(ybar, w, xbar, rows, out); break;
    case 4: backward_input_rows<4>(ybar, w, xbar, rows, out); break;
    case 2: backward_input_rows<2>(ybar, w, xbar, rows, out); break;
    default: backward_input_generic(ybar, w, xbar, rows, in, out);
  }
}

/// WTbar[k,o] += sum_r X[r,k] * Ybar[r,o]; bbar[o] += sum_r Ybar[r,o].
/// Rows accumulate in index order; the 4-row blocks keep the exact same fma
/// chain per element as row-by-row accumulation.
inline void linear_backward_params(const double* __restrict x,
                                   const double* __restrict ybar,
                                   double* __restrict wtbar, double* __restrict bbar,
                                   int rows, int in, int out) {
  int r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* x0 = x + static_cast<long>(r) * in;
    const double* x1 = x0 + in;
    const double* x2 = x1 + in;
    const double* x3 = x2 + in;
    const double* g0 = ybar + static_cast<long>(r) * out;
    const double* g1 = g0 + out;
    const double* g2 = g1 + out;
    const double* g3 = g2 + out;
    for (int k = 0; k < in; ++k) {
      const double a0 = x0[k], a1 = x1[k], a2 = x2[k], a3 = x3[k];
      double* wk = wtbar + static_cast<long>(k) * out;
      for (int o = 0; o < out; ++o) {
        double acc = std::fma(a0, g0[o], wk[o]);
        acc = std::fma(a1, g1[o], acc);
        acc = std::fma(a2, g2[o], acc);
        wk[o] = std::fma(a3, g3[o], acc);
      }
    }
    for (int o = 0; o < out; ++o) {
      double acc = bbar[o] + g0[o];
      acc += g1[o];
      acc += g2[o];
      bbar[o] = acc + g3[o];
    }
  }
  for (; r < rows; ++r) {
    const double* xr = x + static_cast<long>(r) * in;
    const double* gr = ybar + static_cast<long>(r) * out;
    for (int k = 0; k < in; ++k) {
      const double xk = xr[k];
      double* wk = wtbar + static_cast<long>(k) * out;
      for (int o = 0; o < out; ++o) wk[o] = std::fma(xk, gr[o], wk[o]);
    }
    for (int o = 0; o < out; ++o) bbar[o] += gr[o];
  }
}

/// delta *= 1 - t^2 elementwise (t = stored tanh output).
inline void tanh_backward(const double* __restrict t, double* __restrict delta,
                          long n) {
  for (long i = 0; i < n; ++i) delta[i] *= std::fma(-t[i], t[i], 1.0);
}

}  // namespace kernels

/// Per-layer activation storage reused across calls; index 0 holds the input
/// batch, the last entry the network output.
struct MlpWorkspace {
  std::vector<std::vector<double>> acts;
  std::vector<double> delta_a, delta_b;  // ping-pong cotangent rows
  std::vector<double> w_copy;            // out-major weight copy per layer

  void ensure(const MlpSpec& spec, int rows) {
    const int L = spec.n_layers();
    acts.resize(L + 1);
    for (int l = 0; l <= L; ++l)
      acts[l].resize(static_cast<long>(rows) * spec.layer_sizes[l]);
    long max_w = 0, max_n = 0;
    for (int l = 0; l <= L; ++l)
      max_n = std::max(max_n, static_cast<long>(rows) * spec.layer_sizes[l]);
    for (int l = 0; l < L; ++l)
      max_w = std::max(max_w,
                       static_cast<long>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1]);
    delta_a.resize(max_n);
    delta_b.resize(max_n);
    w_copy.resize(max_w);
  }
};

/// Batched forward pass; input rows are acts[0] (caller fills), output lands
/// in acts[L]. Hidden activations are kept for the backward pass.
inline void forward_batched(const MlpSpec& spec, const double* params,
                            MlpWorkspace& ws, int rows) {
  const int L = spec.n_layers();
  long off = 0;
  for (int l = 0; l < L; ++l) {
    const int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    const double* wt = params + off;
    const double* b = wt + static_cast<long>(in) * out;
    kernels::linear_forward(ws.acts[l].data(), wt, b, ws.acts[l + 1].data(), rows, in,
                            out);
    if (l + 1 < L)
      fastmath::tanh_inplace(ws.acts[l + 1].data(), static_cast<long>(rows) * out);
    off += static_cast<long>(in) * out + out;
  }
}

/// Reverse sweep after forward_batched. `ybar` has rows x output entries.
/// Writes the input cotangent into `xbar` (rows x input, may be null) and
/// accumulates parameter gradients into `grad` (same layout as params).
inline void vjp_batched(const MlpSpec& spec, const double* params, MlpWorkspace& ws,
                        int rows, const double* ybar, double* xbar, double* grad) {
  const int L = spec.n_layers();
  std::vector<long> offsets(L);
  long off = 0;
  for (int l = 0; l < L; ++l) {
    offsets[l] = off;
    off += static_cast<long>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1] +
           spec.layer_sizes[l + 1];
  }

  const long out_n = static_cast<long>(rows) * spec.output_size();
  std::memcpy(ws.delta_a.data(), ybar, sizeof(double) * out_n);
  double* delta = ws.delta_a.data();
  double* delta_next = ws.delta_b.data();

  for (int l = L - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    const double* wt = params + offsets[l];
    kernels::linear_backward_params(ws.acts[l].data(), delta, grad + offsets[l],
                                    grad + offsets[l] + static_cast<long>(in) * out,
                                    rows, in, out);
    const bool need_input_grad = l > 0 || xbar != nullptr;
    if (!need_input_grad) break;
    // Transpose WT into out-major form once per layer for the input pass.
    for (int k = 0; k < in; ++k)
      for (int o = 0; o < out; ++o)
        ws.w_copy[static_cast<long>(o) * in + k] = wt[static_cast<long>(k) * out + o];
    double* target = (l > 0) ? delta_next : (xbar ? xbar : delta_next);
    kernels::linear_backward_input(delta, ws.w_copy.data(), target, rows, in, out);
    if (l > 0) {
      kernels::tanh_backward(ws.acts[l].data(), target, static_cast<long>(rows) * in);
      std::swap(delta, delta_next);
    }
  }
}

// ---------------------------------------------------------------------------
// Single-sample convenience API (tests, tiny models). Same arithmetic as the
// batched path with rows = 1.
// ---------------------------------------------------------------------------

inline std::vector<double> mlp_forward(const MlpSpec& spec,
                                       const std::vector<double>& params,
                                       const std::vector<double>& input) {
  validate_spec(spec);
  require(static_cast<long>(params.size()) == param_count(spec),
          ErrorCode::ShapeMismatch, "parameter vector length mismatch");
  require(static_cast<int>(input.size()) == spec.input_size(),
          ErrorCode::ShapeMismatch, "input length mismatch");
  MlpWorkspace ws;
  ws.ensure(spec, 1);
  std::copy(input.begin(), input.end(), ws.acts[0].begin());
  forward_batched(spec, params.data(), ws, 1);
  return ws.acts[spec.n_layers()];
}

struct MlpVjpResult {
  std::vector<double> grad_params;
  std::vector<double> grad_input;
};

inline MlpVjpResult mlp_vjp(const MlpSpec& spec, const std::vector<double>& params,
                            const std::vector<double>& input,
                            const std::vector<double>& cotangent) {
  validate_spec(spec);
  require(static_cast<long>(params.size()) == param_count(spec),
          ErrorCode::ShapeMismatch, "parameter vector length mismatch");
  require(static_cast<int>(input.size()) == spec.input_size(),
          ErrorCode::ShapeMismatch, "input length mismatch");
  require(static_cast<int>(cotangent.size()) == spec.output_size(),
          ErrorCode::ShapeMismatch, "cotangent length mismatch");
  MlpWorkspace ws;
  ws.ensure(spec, 1);
  std::copy(input.begin(), input.end(), ws.acts[0].begin());
  forward_batched(spec, params.data(), ws, 1);
  MlpVjpResult r;
  r.grad_params.assign(params.size(), 0.0);
  r.grad_input.assign(input.size(), 0.0);
  vjp_batched(spec, params.data(), ws, 1, cotangent.data(), r.grad_input.data(),
              r.grad_params.data());
  return r;
}

}  // namespace graphpde::nn
