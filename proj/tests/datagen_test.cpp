#include "graphpde/datagen.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"

using namespace graphpde;
using datagen::BoundaryKind;
using datagen::EquationSpec;
using datagen::PdeKind;

namespace {

EquationSpec small_spec(PdeKind kind, int grid, double dt = 0.0) {
  EquationSpec s = datagen::default_equation(kind);
  s.gt_grid = grid;
  if (dt > 0) s.gt_dt = dt;
  return s;
}

double field_min(const Field& f, int c) {
  double m = f.at(0, c);
  for (int i = 0; i < f.n; ++i) m = std::min(m, f.at(i, c));
  return m;
}
double field_max(const Field& f, int c) {
  double m = f.at(0, c);
  for (int i = 0; i < f.n; ++i) m = std::max(m, f.at(i, c));
  return m;
}

TEST(InitialCondition, HeatNormalizedExactly) {
  const auto spec = small_spec(PdeKind::heat, 32);
  const Field u = datagen::sample_initial_condition(spec, 4);
  EXPECT_EQ(field_min(u, 0), 0.0);
  EXPECT_EQ(field_max(u, 0), 1.0);
}

TEST(InitialCondition, BurgersRangeExactly) {
  const auto spec = small_spec(PdeKind::burgers, 32);
  const Field u = datagen::sample_initial_condition(spec, 9);
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(field_min(u, c), -3.0);
    EXPECT_EQ(field_max(u, c), 3.0);
  }
}

TEST(InitialCondition, SeededDeterminism) {
  const auto spec = small_spec(PdeKind::convdiff, 48);
  const Field a = datagen::sample_initial_condition(spec, 123);
  const Field b = datagen::sample_initial_condition(spec, 123);
  const Field c = datagen::sample_initial_condition(spec, 124);
  EXPECT_EQ(a.v, b.v);
  EXPECT_NE(a.v, c.v);
}

// Single Laplacian eigenmode decays as exp(-D (k^2 + l^2) t) on the periodic
// domain.
TEST(GroundTruth, HeatSingleModeDecay) {
  EquationSpec spec = small_spec(PdeKind::heat, 64);
  spec.bc = BoundaryKind::periodic;  // periodic test configuration
  spec.domain_lo = {0.0, 0.0};
  spec.domain_hi = {2.0 * M_PI, 2.0 * M_PI};
  const auto grid = datagen::make_grid(spec);

  Field u0(grid.n_nodes(), 1);
  for (int i = 0; i < grid.n_nodes(); ++i) {
    const auto p = grid.coord(i);
    u0.at(i, 0) = std::cos(p.x + p.y);
  }
  const double t_end = 0.1;
  const auto traj = datagen::solve_ground_truth(spec, u0, t_end);

  const double decay = std::exp(-spec.diffusion * 2.0 * t_end);
  double num = 0, den = 0;
  for (int i = 0; i < grid.n_nodes(); ++i) {
    const double want = decay * u0.at(i, 0);
    const double got = traj.frames.back().at(i, 0);
    num += (got - want) * (got - want);
    den += want * want;
  }
  EXPECT_LE(std::sqrt(num / den), 0.01);
}

// Traveling decaying wave cos(k.(x - v t)) exp(-D |k|^2 t).
TEST(GroundTruth, ConvDiffTravelingWave) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 64);
  const auto grid = datagen::make_grid(spec);
  Field u0(grid.n_nodes(), 1);
  for (int i = 0; i < grid.n_nodes(); ++i) {
    const auto p = grid.coord(i);
    u0.at(i, 0) = std::cos(p.x + p.y);
  }
  const double t_end = 0.2;
  const auto traj = datagen::solve_ground_truth(spec, u0, t_end);

  const double decay = std::exp(-spec.diffusion * 2.0 * t_end);
  const double phase = (spec.vel_x + spec.vel_y) * t_end;
  double num = 0, den = 0;
  for (int i = 0; i < grid.n_nodes(); ++i) {
    const auto p = grid.coord(i);
    const double want = decay * std::cos(p.x + p.y - phase);
    const double got = traj.frames.back().at(i, 0);
    num += (got - want) * (got - want);
    den += want * want;
  }
  EXPECT_LE(std::sqrt(num / den), 0.02);
}

TEST(GroundTruth, ConstantFieldStaysConstant) {
  for (PdeKind kind : {PdeKind::heat, PdeKind::convdiff}) {
    EquationSpec spec = small_spec(kind, 32);
    spec.bc = BoundaryKind::periodic;
    spec.domain_lo = {0.0, 0.0};
    spec.domain_hi = {2.0 * M_PI, 2.0 * M_PI};
    const auto grid = datagen::make_grid(spec);
    Field u0(grid.n_nodes(), 1, 0.7);
    const auto traj = datagen::solve_ground_truth(spec, u0, 20 * spec.gt_dt);
    for (int i = 0; i < grid.n_nodes(); ++i)
      EXPECT_NEAR(traj.frames.back().at(i, 0), 0.7, 1e-11);
  }
}

TEST(GroundTruth, DirichletBoundaryPinnedExactly) {
  EquationSpec spec = small_spec(PdeKind::heat, 32);
  const auto grid = datagen::make_grid(spec);
  const Field u0 = datagen::sample_initial_condition(spec, 6);
  const auto traj = datagen::solve_ground_truth(spec, u0, 50 * spec.gt_dt);
  for (const auto& f : traj.frames) {
    for (int i = 0; i < grid.n_nodes(); ++i) {
      if (grid.is_boundary(i)) ASSERT_EQ(f.at(i, 0), u0.at(i, 0));
    }
  }
  // interior actually evolves
  bool moved = false;
  for (int i = 0; i < grid.n_nodes(); ++i)
    if (!grid.is_boundary(i) &&
        std::abs(traj.frames.back().at(i, 0) - u0.at(i, 0)) > 1e-6)
      moved = true;
  EXPECT_TRUE(moved);
}

// Implicit diffusion and centered convection preserve the spatial mean on
// periodic grids up to the linear-solver tolerance.
TEST(GroundTruth, MassConservedPerStep) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 64);
  const Field u0 = datagen::sample_initial_condition(spec, 15);
  const auto traj = datagen::solve_ground_truth(spec, u0, 20 * spec.gt_dt);
  for (size_t f = 1; f < traj.frames.size(); ++f) {
    const double m0 = std::accumulate(traj.frames[f - 1].v.begin(),
                                      traj.frames[f - 1].v.end(), 0.0);
    const double m1 =
        std::accumulate(traj.frames[f].v.begin(), traj.frames[f].v.end(), 0.0);
    EXPECT_LE(std::abs(m1 - m0), 1e-10 * std::abs(m0));
  }
}

// Backward Euler is first order: halving dt roughly halves the error against
// a dt/4 reference.
TEST(GroundTruth, BurgersFirstOrderInTime) {
  EquationSpec spec = small_spec(PdeKind::burgers, 48, 1.6e-3);
  const Field u0 = datagen::sample_initial_condition(spec, 21);
  const double t_end = 16 * 1.6e-3;

  auto solve_at = [&](double dt) {
    EquationSpec s = spec;
    s.gt_dt = dt;
    return datagen::solve_ground_truth(s, u0, t_end).frames.back();
  };
  const Field ref = solve_at(0.4e-3);
  const Field a = solve_at(1.6e-3);
  const Field b = solve_at(0.8e-3);
  double ea = 0, eb = 0;
  for (size_t i = 0; i < ref.v.size(); ++i) {
    ea += (a.v[i] - ref.v[i]) * (a.v[i] - ref.v[i]);
    eb += (b.v[i] - ref.v[i]) * (b.v[i] - ref.v[i]);
  }
  const double ratio = std::sqrt(ea) / std::sqrt(eb);
  EXPECT_GE(ratio, 1.5);
  EXPECT_LE(ratio, 2.5);
}

// ---------------------------------------------------------------------------
// Downsampling / perturbations
// ---------------------------------------------------------------------------

TEST(Downsample, IdentityRestriction) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 16);
  const Field u0 = datagen::sample_initial_condition(spec, 3);
  const auto traj = datagen::solve_ground_truth(spec, u0, 5 * spec.gt_dt);
  const auto rec =
      datagen::downsample(traj, spec, 16 * 16, traj.times, 5);
  ASSERT_EQ(rec.n_nodes(), 256);
  ASSERT_EQ(rec.n_times(), 6);
  for (int t = 0; t < rec.n_times(); ++t)
    EXPECT_EQ(rec.states[t].v, traj.frames[t].v);
}

TEST(Downsample, SeedsChangeNodeSelection) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 32);
  const Field u0 = datagen::sample_initial_condition(spec, 3);
  const auto traj = datagen::solve_ground_truth(spec, u0, spec.gt_dt);
  const auto a = datagen::downsample(traj, spec, 50, {0.0, spec.gt_dt}, 1);
  const auto b = datagen::downsample(traj, spec, 50, {0.0, spec.gt_dt}, 2);
  bool same = true;
  for (int i = 0; i < 50; ++i)
    if (a.coords[i].x != b.coords[i].x || a.coords[i].y != b.coords[i].y) same = false;
  EXPECT_FALSE(same);
}

TEST(Downsample, ExactSnapshotIndexing) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 16);  // gt_dt = 2e-4
  const Field u0 = datagen::sample_initial_condition(spec, 3);
  const auto traj = datagen::solve_ground_truth(spec, u0, 0.2);
  std::vector<double> t_obs;
  for (int i = 0; i <= 10; ++i) t_obs.push_back(i * 0.02);
  const auto rec = datagen::downsample(traj, spec, 100, t_obs, 7);
  for (int i = 0; i <= 10; ++i) {
    const long frame = std::lround(t_obs[i] / spec.gt_dt);
    EXPECT_EQ(frame, 100l * i);
    // values match the frame at that exact index for the sampled nodes
  }
  EXPECT_EQ(rec.n_times(), 11);
}

TEST(Downsample, RejectsOffGridTimes) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 16);
  const Field u0 = datagen::sample_initial_condition(spec, 3);
  const auto traj = datagen::solve_ground_truth(spec, u0, 5 * spec.gt_dt);
  try {
    datagen::downsample(traj, spec, 10, {0.0, 1.5 * spec.gt_dt}, 1);
    FAIL() << "off-grid time accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeNotOnGrid);
  }
}

TEST(Downsample, ExcludesDirichletBoundaryNodes) {
  EquationSpec spec = small_spec(PdeKind::heat, 16);
  const auto grid = datagen::make_grid(spec);
  const Field u0 = datagen::sample_initial_condition(spec, 3);
  const auto traj = datagen::solve_ground_truth(spec, u0, spec.gt_dt);
  // interior of a 16x16 Dirichlet grid: 14^2 = 196 candidates
  const auto rec = datagen::downsample(traj, spec, 196, {0.0}, 9);
  for (const auto& c : rec.coords) {
    EXPECT_GT(c.x, 0.0);
    EXPECT_LT(c.x, 1.0);
    EXPECT_GT(c.y, 0.0);
    EXPECT_LT(c.y, 1.0);
  }
  EXPECT_THROW(datagen::downsample(traj, spec, 197, {0.0}, 9), Error);
}

TEST(PerturbTimes, SigmaZeroIsIdentity) {
  const std::vector<double> t{0.0, 0.02, 0.04, 0.06};
  EXPECT_EQ(datagen::perturb_times(t, 0.0, 1, 2e-4), t);
}

TEST(PerturbTimes, JitteredGridStaysValid) {
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back(i * 0.02);
  const double sigma = 0.02 / 6.0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto out = datagen::perturb_times(t, sigma, seed, 2e-4);
    ASSERT_EQ(out.size(), t.size());
    EXPECT_EQ(out.front(), 0.0);
    EXPECT_EQ(out.back(), 0.2);
    bool changed = false;
    for (size_t i = 1; i < out.size(); ++i) {
      EXPECT_GT(out[i], out[i - 1]);
      // snapped to the reference grid
      const double k = out[i] / 2e-4;
      EXPECT_NEAR(k, std::round(k), 1e-6);
      if (std::abs(out[i] - t[i]) > 1e-12) changed = true;
    }
    EXPECT_TRUE(changed);
  }
}

TEST(AddNoise, Behaviour) {
  EquationSpec spec = small_spec(PdeKind::convdiff, 32);
  datagen::GenerateOptions opts;
  opts.kind = PdeKind::convdiff;
  opts.sims = 1;
  opts.nodes = 300;
  opts.t0 = 0;
  opts.t1 = 0.02;
  opts.dt = 0.002;
  opts.seed = 5;
  opts.gt_grid = 32;
  const auto ds = datagen::generate_dataset(opts);
  const auto& rec = ds.sims[0];

  EXPECT_EQ(datagen::add_noise(rec, 0.0, 3).states[0].v, rec.states[0].v);

  const double sigma = 0.02;
  const auto noisy = datagen::add_noise(rec, sigma, 3);
  const auto noisy2 = datagen::add_noise(rec, sigma, 4);
  EXPECT_NE(noisy.states[0].v, noisy2.states[0].v);

  double sum = 0;
  long n = 0;
  for (int t = 0; t < rec.n_times(); ++t)
    for (size_t i = 0; i < rec.states[t].v.size(); ++i) {
      sum += noisy.states[t].v[i] - rec.states[t].v[i];
      ++n;
    }
  const double mean = sum / n;
  EXPECT_LE(std::abs(mean), 3.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST(GenerateDataset, DeterministicAndStructured) {
  datagen::GenerateOptions opts;
  opts.kind = PdeKind::convdiff;
  opts.sims = 2;
  opts.nodes = 60;
  opts.t1 = 0.04;
  opts.dt = 0.02;
  opts.seed = 11;
  opts.gt_grid = 32;
  const auto a = datagen::generate_dataset(opts);
  const auto b = datagen::generate_dataset(opts);
  ASSERT_EQ(a.sims.size(), 2u);
  for (int s = 0; s < 2; ++s) {
    ASSERT_EQ(a.sims[s].n_nodes(), 60);
    ASSERT_EQ(a.sims[s].n_times(), 3);
    for (int t = 0; t < 3; ++t)
      ASSERT_EQ(a.sims[s].states[t].v, b.sims[s].states[t].v);
  }
  // different sims use different nodes and different initial conditions
  EXPECT_NE(a.sims[0].states[0].v, a.sims[1].states[0].v);
}

}  // namespace
