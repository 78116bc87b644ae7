#include "graphpde/mlp.hpp"

#include <gtest/gtest.h>

#include "graphpde/rprop.hpp"
#include "oracles.hpp"

using namespace graphpde;
using nn::MlpSpec;

namespace {

std::vector<double> random_vec(long n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Parameter-count formula: sum_l (in_l*out_l + out_l).
//   phi 4/60/60/60/40:  4*60+60 + 60*60+60 + 60*60+60 + 60*40+40 = 10060
//   gamma 41/60/60/60/1: 41*60+60 + 3660 + 3660 + 60*1+1       = 9901
TEST(Mlp, ParamCount) {
  EXPECT_EQ(nn::param_count(MlpSpec{{4, 60, 60, 60, 40}}), 10060);
  EXPECT_EQ(nn::param_count(MlpSpec{{41, 60, 60, 60, 1}}), 9901);
  EXPECT_EQ(nn::param_count({MlpSpec{{4, 60, 60, 60, 40}}, MlpSpec{{41, 60, 60, 60, 1}}}),
            19961);
}

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  const MlpSpec spec{{3, 8, 2}};
  const std::vector<double> params(nn::param_count(spec), 0.0);
  const auto out = nn::mlp_forward(spec, params, {1.5, -2.0, 0.25});
  for (double o : out) EXPECT_EQ(o, 0.0);
}

TEST(Mlp, LinearNetIsAffine) {
  const MlpSpec spec{{1, 1}};  // two layers: identity output, no hidden
  const double w = 1.75, b = -0.5;
  const std::vector<double> params{w, b};
  const auto out = nn::mlp_forward(spec, params, {3.0});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], w * 3.0 + b);
}

TEST(Mlp, MatchesNaiveOracle) {
  const MlpSpec spec{{4, 60, 60, 60, 40}};
  std::vector<double> params(nn::param_count(spec));
  Rng rng(0);
  nn::init_params(spec, rng, params.data());
  const std::vector<double> input{0.3, -1.2, 0.05, 2.0};

  const auto got = nn::mlp_forward(spec, params, input);
  const auto want = oracles::naive_mlp_forward(spec, params, input);
  ASSERT_EQ(got.size(), want.size());
  double num = 0, den = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  EXPECT_LE(std::sqrt(num), 1e-12 * std::max(1.0, std::sqrt(den)));
}

TEST(Mlp, VjpLinearNetAnalytic) {
  const MlpSpec spec{{1, 1}};
  const double w = 1.75, b = -0.5, x = 3.0;
  (void)b;
  const auto r = nn::mlp_vjp(spec, {w, b}, {x}, {1.0});
  EXPECT_DOUBLE_EQ(r.grad_input[0], w);
  EXPECT_DOUBLE_EQ(r.grad_params[0], x);  // dW
  EXPECT_DOUBLE_EQ(r.grad_params[1], 1.0);  // db
}

TEST(Mlp, VjpZeroCotangentIsZero) {
  const MlpSpec spec{{4, 10, 3}};
  std::vector<double> params(nn::param_count(spec));
  Rng rng(5);
  nn::init_params(spec, rng, params.data());
  const auto r = nn::mlp_vjp(spec, params, {0.1, 0.2, 0.3, 0.4}, {0.0, 0.0, 0.0});
  for (double g : r.grad_params) EXPECT_EQ(g, 0.0);
  for (double g : r.grad_input) EXPECT_EQ(g, 0.0);
}

TEST(Mlp, VjpMatchesFiniteDifferences) {
  const MlpSpec spec{{4, 60, 40}};
  std::vector<double> params(nn::param_count(spec));
  Rng rng(7);
  nn::init_params(spec, rng, params.data());
  const std::vector<double> input{0.4, -0.8, 1.1, 0.2};
  const std::vector<double> cot = random_vec(40, 11);

  const auto r = nn::mlp_vjp(spec, params, input, cot);

  auto scalar_loss_params = [&](const std::vector<double>& p) {
    const auto out = oracles::naive_mlp_forward(spec, p, input);
    double s = 0;
    for (size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
    return s;
  };
  Rng pick(13);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t i = pick.next_u64() % params.size();
    const double fd = oracles::central_fd(scalar_loss_params, params, i, 1e-6);
    if (std::abs(fd) < 1e-10) continue;  // relative comparison needs signal
    EXPECT_LE(oracles::rel_err(r.grad_params[i], fd), 1e-6)
        << "param " << i << " got " << r.grad_params[i] << " fd " << fd;
  }
  auto scalar_loss_input = [&](const std::vector<double>& x) {
    const auto out = oracles::naive_mlp_forward(spec, params, x);
    double s = 0;
    for (size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
    return s;
  };
  for (size_t i = 0; i < input.size(); ++i) {
    const double fd = oracles::central_fd(scalar_loss_input, input, i, 1e-6);
    EXPECT_LE(oracles::rel_err(r.grad_input[i], fd), 1e-6);
  }
}

// Property over random shapes: VJP agrees with central differences.
TEST(Mlp, VjpFiniteDifferenceProperty) {
  Rng shapes(99);
  for (int trial = 0; trial < 5; ++trial) {
    const int in = 1 + static_cast<int>(shapes.next_u64() % 6);
    const int hid = 2 + static_cast<int>(shapes.next_u64() % 20);
    const int out = 1 + static_cast<int>(shapes.next_u64() % 5);
    const MlpSpec spec{{in, hid, hid, out}};
    std::vector<double> params(nn::param_count(spec));
    Rng rng(100 + trial);
    nn::init_params(spec, rng, params.data());
    const auto input = random_vec(in, 200 + trial, 0.7);
    const auto cot = random_vec(out, 300 + trial);
    const auto r = nn::mlp_vjp(spec, params, input, cot);
    auto loss = [&](const std::vector<double>& p) {
      const auto o = oracles::naive_mlp_forward(spec, p, input);
      double s = 0;
      for (size_t i = 0; i < o.size(); ++i) s += cot[i] * o[i];
      return s;
    };
    Rng pick(400 + trial);
    for (int k = 0; k < 20; ++k) {
      const size_t i = pick.next_u64() % params.size();
      const double fd = oracles::central_fd(loss, params, i, 1e-6);
      if (std::abs(fd) < 1e-9) continue;
      EXPECT_LE(oracles::rel_err(r.grad_params[i], fd), 1e-6);
    }
  }
}

TEST(Mlp, HiddenActivationsBounded) {
  const MlpSpec spec{{4, 60, 60, 60, 40}};
  std::vector<double> params(nn::param_count(spec));
  Rng rng(21);
  nn::init_params(spec, rng, params.data());
  nn::MlpWorkspace ws;
  ws.ensure(spec, 1);
  const auto input = random_vec(4, 22, 2.0);
  std::copy(input.begin(), input.end(), ws.acts[0].begin());
  nn::forward_batched(spec, params.data(), ws, 1);
  for (int l = 1; l < spec.n_layers(); ++l)
    for (double h : ws.acts[l]) EXPECT_LT(std::abs(h), 1.0);
}

TEST(Mlp, ShapeMismatchErrors) {
  const MlpSpec spec{{2, 3}};
  std::vector<double> params(nn::param_count(spec), 0.1);
  EXPECT_THROW(nn::mlp_forward(spec, params, {1.0}), Error);
  EXPECT_THROW(nn::mlp_forward(spec, {0.1, 0.2}, {1.0, 2.0}), Error);
  EXPECT_THROW(nn::mlp_vjp(spec, params, {1.0, 2.0}, {1.0}), Error);
}

// ---------------------------------------------------------------------------
// Rprop
// ---------------------------------------------------------------------------

TEST(Rprop, ZeroGradientLeavesEverythingUnchanged) {
  nn::RpropState st(3);
  std::vector<double> params{1.0, -2.0, 0.5};
  const auto params0 = params;
  const auto steps0 = st.step;
  nn::rprop_step(st, params, {0.0, 0.0, 0.0});
  EXPECT_EQ(params, params0);
  EXPECT_EQ(st.step, steps0);
}

TEST(Rprop, ConstantSignGrowsStepTwiceOverThreeIterations) {
  nn::RpropConfig cfg;
  nn::RpropState st(1, cfg);
  std::vector<double> params{0.0};
  for (int i = 0; i < 3; ++i) nn::rprop_step(st, params, {1.0});
  // first iteration: prev=0 (neutral); then two sign agreements
  EXPECT_DOUBLE_EQ(st.step[0], cfg.step_init * cfg.eta_plus * cfg.eta_plus);
  EXPECT_DOUBLE_EQ(params[0],
                   -(cfg.step_init + cfg.step_init * cfg.eta_plus +
                     cfg.step_init * cfg.eta_plus * cfg.eta_plus));
}

// Quadratic loss f(theta) = theta^2, started away from the optimum with a
// large initial step: |theta| decreases monotonically until the iterate
// overshoots, then the step shrinks by eta_minus. Expectations follow an
// independent hand simulation of iRprop-.
TEST(Rprop, QuadraticHandSimulation) {
  nn::RpropConfig cfg;
  cfg.step_init = 0.1;
  cfg.step_max = 1.0;
  nn::RpropState st(1, cfg);
  std::vector<double> params{1.0};

  // independent simulation
  double theta = 1.0, step = cfg.step_init, prev = 0.0;
  std::vector<double> expected;
  for (int i = 0; i < 10; ++i) {
    double g = 2.0 * theta;
    const double s = prev * g;
    if (s > 0) step = std::min(step * cfg.eta_plus, cfg.step_max);
    if (s < 0) {
      step = std::max(step * cfg.eta_minus, cfg.step_min);
      g = 0.0;
    }
    theta -= ((g > 0) - (g < 0)) * step;
    prev = g;
    expected.push_back(theta);
  }

  bool overshot = false;   // iterate crossed zero
  bool saw_shrink = false;  // eta_minus applied after the crossing
  double prev_abs = 1.0;
  double last_step = cfg.step_init;
  for (int i = 0; i < 10; ++i) {
    nn::rprop_step(st, params, {2.0 * params[0]});
    ASSERT_DOUBLE_EQ(params[0], expected[i]) << "diverged from hand simulation at " << i;
    if (!overshot) {
      if (params[0] < 0.0)
        overshot = true;
      else
        EXPECT_LE(std::abs(params[0]), prev_abs) << "not monotone before overshoot";
    } else if (st.step[0] < last_step) {
      saw_shrink = true;
    }
    prev_abs = std::abs(params[0]);
    last_step = st.step[0];
  }
  EXPECT_TRUE(overshot) << "no overshoot in 10 iterations";
  EXPECT_TRUE(saw_shrink) << "step never shrank after the overshoot";
}

// Sign-only dependence: scaling the gradient by 10 gives bit-identical
// trajectories.
TEST(Rprop, InvariantToPositiveGradientRescaling) {
  nn::RpropState sa(4), sb(4);
  std::vector<double> pa{0.3, -0.7, 1.1, 0.0}, pb = pa;
  Rng rng(17);
  for (int i = 0; i < 25; ++i) {
    std::vector<double> g(4), g10(4);
    for (int k = 0; k < 4; ++k) {
      g[k] = rng.normal();
      g10[k] = 10.0 * g[k];
    }
    nn::rprop_step(sa, pa, g);
    nn::rprop_step(sb, pb, g10);
  }
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(sa.step, sb.step);
}

TEST(Rprop, NonFiniteGradientThrows) {
  nn::RpropState st(2);
  std::vector<double> params{0.0, 0.0};
  try {
    nn::rprop_step(st, params, {1.0, std::numeric_limits<double>::quiet_NaN()});
    FAIL() << "NaN gradient accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
  }
}

TEST(Rprop, StepsStayClamped) {
  nn::RpropConfig cfg;
  nn::RpropState st(1, cfg);
  std::vector<double> params{0.0};
  for (int i = 0; i < 200; ++i) nn::rprop_step(st, params, {1.0});
  EXPECT_DOUBLE_EQ(st.step[0], cfg.step_max);
  // alternate signs to drive the step down
  for (int i = 0; i < 400; ++i) nn::rprop_step(st, params, {(i % 2) ? 1.0 : -1.0});
  EXPECT_GE(st.step[0], cfg.step_min);
}

}  // namespace
