#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <cmath>

#include "rcm/heatkernel.hpp"

using namespace rcm;

namespace {

Environment unit(int d, int side, BoundaryMode mode = BoundaryMode::periodic) {
  return build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(d, side, mode), 0);
}

}  // namespace

TEST(ExactKernel, HomogeneousReturnProbabilities) {
  const auto line = unit(1, 64);
  EXPECT_EQ(exact_kernel(line, 0, 2).prob[0], 0.5);
  EXPECT_EQ(exact_kernel(line, 0, 4).prob[0], 0.375);
  for (unsigned n = 1; n <= 20; ++n) {
    const double binom = boost::math::binomial_coefficient<double>(2 * n, n) * std::pow(0.25, n);
    EXPECT_NEAR(exact_kernel(line, 5, 2 * n).prob[5], binom, 1e-15);
  }
  const auto plane = unit(2, 16);
  EXPECT_EQ(exact_kernel(plane, 7, 2).prob[7], 0.25);
  EXPECT_EQ(exact_kernel(plane, 7, 1).prob[7], 0.0);
}

TEST(ExactKernel, MassConservation) {
  for (auto mode : {BoundaryMode::periodic, BoundaryMode::free}) {
    const auto env = build_environment(EnvironmentLaw::iid(Distribution::log_uniform(0.01, 100.0)),
                                       Lattice::cube(2, 20, mode), 4);
    const auto snap = exact_kernel(env, 33, 2000);
    EXPECT_NEAR(snap.total(), 1.0, 1e-12);
    for (double p : snap.prob) EXPECT_GE(p, 0.0);
  }
  const auto abs = unit(2, 9, BoundaryMode::absorbing);
  EXPECT_NEAR(exact_kernel(abs, abs.lattice().origin(), 500).total(), 1.0, 1e-12);
}

TEST(ExactKernel, Reversibility) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.1, 5.0)),
                                       Lattice::cube(2, 5, seed % 2 ? BoundaryMode::free : BoundaryMode::periodic), seed);
    const std::size_t n = 3 + seed;
    std::vector<std::vector<double>> rows;
    for (Vertex x = 0; x < env.size(); ++x) rows.push_back(exact_kernel(env, x, n).prob);
    for (Vertex x = 0; x < env.size(); ++x)
      for (Vertex y = 0; y < env.size(); ++y)
        EXPECT_NEAR(env.pi(x) * rows[x][y], env.pi(y) * rows[y][x], 1e-13);
  }
}

TEST(ExactKernel, DegenerateBaseRejected) {
  Environment zero(Lattice::cube(2, 4, BoundaryMode::periodic));
  EXPECT_THROW(exact_kernel(zero, 0, 3), DegenerateVertexError);
}

TEST(ExactKernel, MonteCarloAgrees) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.5, 2.0)),
                                     Lattice::cube(2, 8, BoundaryMode::periodic), 2);
  const auto ex = exact_kernel(env, 10, 6);
  const std::size_t m = 20000;
  const auto mc = monte_carlo_kernel(env, 10, 6, m, 5);
  EXPECT_EQ(mc.method, KernelMethod::monte_carlo);
  EXPECT_EQ(mc.samples, m);
  for (Vertex y = 0; y < env.size(); ++y) {
    const double se = std::sqrt(ex.prob[y] * (1 - ex.prob[y]) / static_cast<double>(m));
    EXPECT_NEAR(mc.prob[y], ex.prob[y], 4 * se + 1e-12);
  }
}

TEST(ReturnSeries, PlaneSlopeAndPositivity) {
  const auto env = unit(2, 128);
  const auto s = return_probability_series(env, env.lattice().origin(), 256);
  EXPECT_NEAR(s.tail_fit.slope, -1.0, 0.1);
  for (double p : s.p) EXPECT_GT(p, 0.0);
}

TEST(ReturnSeries, EllipticScaledDiagonalBounded) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.5, 2.0)),
                                     Lattice::cube(2, 96, BoundaryMode::periodic), 3);
  const auto s = return_probability_series(env, env.lattice().origin(), 200);
  double lo = 1e300, hi = 0.0;
  for (std::size_t k = s.n.size() / 2; k < s.n.size(); ++k) {
    lo = std::min(lo, s.n[k] * s.p[k]);
    hi = std::max(hi, s.n[k] * s.p[k]);
  }
  EXPECT_GT(lo, 0.05);
  EXPECT_LT(hi / lo, 1.5);
}

TEST(DiagonalChain, OrderedOnRandomEnvironments) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto env = build_environment(EnvironmentLaw::iid(Distribution::log_uniform(0.1, 10.0)),
                                       Lattice::cube(seed % 2 ? 1 : 2, 24, BoundaryMode::periodic), seed);
    for (std::size_t n : {1u, 4u, 9u, 30u}) {
      const auto c = diagonal_lower_bound(env, 5, n);
      EXPECT_LE(c.cs_bound, c.cs_sum * (1 + 1e-12));
      EXPECT_LE(c.cs_sum, c.diagonal * (1 + 1e-12));
      EXPECT_GT(c.ball_size, 0u);
    }
  }
}

TEST(Trap, ProductBoundAndControl) {
  auto lat = Lattice::cube(2, 15, BoundaryMode::free);
  Point access = lat->center();
  access[1] += 2;
  const double n0 = 32.0;
  const auto [env, g] = build_trap_environment(lat, 1.0 / n0, access, EnvironmentLaw::constant(1.0), 0);
  const auto rows = trap_decay_experiment(env, g, {4, 8, 16, 32, 64});
  for (const auto& r : rows) {
    EXPECT_LE(r.lower_bound, r.measured);
    EXPECT_NEAR(r.entry, (1.0 / n0) / env.pi(g.access), 1e-15);
  }
  // Two-state reduction of the core: (1 + 3/n)^{-2m} >= exp(-6) for m ~ n.
  const auto& r32 = rows[3];
  EXPECT_GE(r32.confinement, std::exp(-6.0));

  const auto [plain, g1] = build_trap_environment(lat, 1.0, access, EnvironmentLaw::constant(1.0), 0);
  for (const auto& r : trap_decay_experiment(plain, g1, {8, 16})) EXPECT_DOUBLE_EQ(r.measured, r.control);
}

TEST(Isoperimetry, CycleArcs) {
  const int L = 10;
  const auto env = unit(1, L);
  const auto prof = isoperimetric_profile(env);
  EXPECT_TRUE(prof.exact);
  for (int k = 1; k < L; ++k) EXPECT_DOUBLE_EQ(prof(2.0 * k), 1.0 / k);
  EXPECT_EQ(prof(2.0 * L), 0.0);
  EXPECT_TRUE(std::isinf(prof(1.0)));
}

TEST(Isoperimetry, ConnectedRestrictionAndMonotone) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.2, 3.0)),
                                       Lattice::make({3, 4}, BoundaryMode::free), seed);
    const auto a = isoperimetric_profile(env);
    IsoperimetryOptions all;
    all.connected_only = false;
    const auto b = isoperimetric_profile(env, all);
    for (double r = 0.0; r < 60.0; r += 0.25) EXPECT_DOUBLE_EQ(a(r), b(r));
    for (std::size_t k = 1; k < a.phi.size(); ++k) EXPECT_LE(a.phi[k], a.phi[k - 1]);
  }
}

TEST(Isoperimetry, CutoffAndFallback) {
  const auto env = unit(2, 6);
  EXPECT_THROW(isoperimetric_profile(env), PreconditionError);
  IsoperimetryOptions opt;
  opt.allow_fallback = true;
  const auto prof = isoperimetric_profile(env, opt);
  EXPECT_FALSE(prof.exact);
  // Upper bound: a single vertex has ratio 1; two rows of the torus give 12 / 48.
  EXPECT_LE(prof(4.0), 1.0);
  EXPECT_LE(prof(72.0), 0.25 + 1e-12);
}

TEST(Lazify, Properties) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.2, 3.0)),
                                     Lattice::cube(2, 4, BoundaryMode::free), 1);
  const auto k = TransitionKernel::from(env);
  const auto same = lazify(k, 0.0);
  const auto lazy = lazify(k, 0.25);
  for (Vertex x = 0; x < env.size(); ++x) {
    double row = 0.0;
    for (Vertex y = 0; y < env.size(); ++y) {
      EXPECT_EQ(same.probability(x, y), k.probability(x, y));
      row += lazy.probability(x, y);
      EXPECT_NEAR(env.pi(x) * lazy.probability(x, y), env.pi(y) * lazy.probability(y, x), 1e-15);
    }
    EXPECT_NEAR(row, 1.0, 1e-15);
    EXPECT_GE(lazy.probability(x, x), 0.25);
  }
  EXPECT_THROW(lazify(k, 1.0), ParameterError);
}

TEST(MorrisPeres, ClosedFormIntegral) {
  // phi(r) = r^{-1/2}: int_a^b dr / (r phi^2) = b - a.
  auto phi = [](double r) { return 1.0 / std::sqrt(r); };
  for (double eps : {0.5, 0.1, 0.01}) {
    const double expected = std::ceil(1.0 + 9.0 * (4.0 / eps - 4.0));
    EXPECT_EQ(morris_peres_threshold(phi, 0.25, eps, 1.0), expected);
  }
  EXPECT_EQ(morris_peres_threshold(phi, 0.25, 2.0, 1.0), 1.0);
  EXPECT_THROW(morris_peres_threshold(phi, 0.6, 0.1, 1.0), ParameterError);
}

TEST(MorrisPeres, StepProfileIntegral) {
  IsoperimetricProfile prof;
  prof.volumes = {1.0, 4.0, 16.0};
  prof.phi = {1.0, 0.5, 0.25};
  // [2, 8]: log 2 / 1 + log 2 / 0.25; [2, 32]: log 2 / 1 + 2 log 2 / 0.25 + log 2 / 0.0625.
  EXPECT_NEAR(morris_peres_integral(prof, 2.0, 8.0), std::log(2.0) * 5.0, 1e-14);
  EXPECT_NEAR(morris_peres_integral(prof, 2.0, 32.0), std::log(2.0) * 25.0, 1e-14);
  EXPECT_EQ(morris_peres_integral(prof, 0.5, 1.0), 0.0);
  prof.coverage = 20.0;
  EXPECT_THROW(morris_peres_integral(prof, 2.0, 32.0), PreconditionError);
  prof.coverage = 1e9;
  prof.phi.back() = 0.0;
  EXPECT_TRUE(std::isinf(morris_peres_integral(prof, 2.0, 32.0)));
}

TEST(MorrisPeres, ImplicationOnWeightedCycle) {
  const double gamma = 0.25;
  for (auto [c, eps] : {std::pair{4.0, 0.1}, std::pair{30.0, 0.01}}) {
    const auto env = build_environment(EnvironmentLaw::constant(c), Lattice::cube(1, 8, BoundaryMode::periodic), 0);
    const auto prof = lazify(isoperimetric_profile(env), gamma);
    const double n = morris_peres_threshold(prof, gamma, eps, 2.0 * c);
    ASSERT_TRUE(std::isfinite(n));
    EXPECT_GT(n, 1.0);
    const auto k = lazify(TransitionKernel::from(env), gamma);
    EXPECT_LE(max_kernel_ratio(k, static_cast<std::size_t>(n)), eps);
  }
}

TEST(ContinuousTime, BesselOracleOnLine) {
  const auto env = unit(1, 200);
  const auto snaps = continuous_kernels(env, 100, {0.0, 0.5, 3.0, 10.0});
  EXPECT_EQ(snaps[0].prob[100], 1.0);
  for (std::size_t j = 1; j < snaps.size(); ++j) {
    const double t = snaps[j].time;
    EXPECT_NEAR(snaps[j].total(), 1.0, 1e-9);
    for (int k : {0, 1, 3}) EXPECT_NEAR(snaps[j].prob[100 + k], std::exp(-2 * t) * boost::math::cyl_bessel_i(k, 2 * t), 1e-9);
  }
}

TEST(ContinuousTime, DiffusiveBounds) {
  const auto env = unit(2, 24);
  const Vertex c = env.lattice().origin();
  const auto zero = diffusive_bound_stats(env, c, 0.0, {0.0});
  EXPECT_EQ(zero.mean_displacement, 0.0);
  EXPECT_EQ(zero.points, 1u);

  const std::vector<double> times{1.0, 4.0, 16.0};
  const auto ex = diffusive_bound_stats(env, c, 1.0, times);
  EXPECT_EQ(ex.points, 5u);
  EXPECT_LT(ex.mean_displacement, 2.0);
  EXPECT_GT(ex.mean_displacement, 0.5);
  EXPECT_LT(ex.on_diagonal, 1.0);

  const auto mc = diffusive_bound_stats(env, c, 0.0, times, KernelMethod::monte_carlo, 4000, 3);
  const auto ex0 = diffusive_bound_stats(env, c, 0.0, times);
  EXPECT_NEAR(mc.mean_displacement, ex0.mean_displacement, 0.1);
  EXPECT_NEAR(mc.on_diagonal, ex0.on_diagonal, 0.1);

  const auto rnd = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.5, 2.0)),
                                     Lattice::cube(2, 24, BoundaryMode::periodic), 7);
  EXPECT_LT(diffusive_bound_stats(rnd, c, 1.5, times).on_diagonal, 1.0);
}
