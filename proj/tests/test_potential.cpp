#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rcm/potential.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

using namespace rcm;

namespace {

EnvironmentLaw elliptic() { return EnvironmentLaw::iid(Distribution::uniform(0.5, 2.0)); }

// Dense weighted Laplacian K = D - W for an oracle solve.
Eigen::MatrixXd dense_laplacian(const Environment& env) {
  const auto n = static_cast<Eigen::Index>(env.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  env.lattice().for_each_edge([&](Vertex v, int dir) {
    const auto y = static_cast<Eigen::Index>(env.lattice().neighbor(v, Lattice::slot_of(dir, 1)));
    const auto x = static_cast<Eigen::Index>(v);
    const double w = env.forward(v, dir);
    K(x, x) += w;
    K(y, y) += w;
    K(x, y) -= w;
    K(y, x) -= w;
  });
  return K;
}

// Effective resistance from the Laplacian pseudo-inverse.
double oracle_resistance(const Environment& env, Vertex a, Vertex b) {
  const Eigen::MatrixXd K = dense_laplacian(env);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(K.rows());
  e(static_cast<Eigen::Index>(a)) = 1;
  e(static_cast<Eigen::Index>(b)) = -1;
  const Eigen::MatrixXd Kp = K.completeOrthogonalDecomposition().pseudoInverse();
  return e.dot(Kp * e);
}

// Thomas algorithm for the d=1 Dirichlet problem with conductances c[i] on (i, i+1).
std::vector<double> tridiagonal_harmonic(const std::vector<double>& c, double left, double right) {
  const std::size_t N = c.size();  // vertices 0..N
  const std::size_t m = N - 1;     // unknowns 1..N-1
  std::vector<double> a(m), b(m), cc(m), d(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = -c[i];
    b[i] = c[i] + c[i + 1];
    cc[i] = -c[i + 1];
  }
  d[0] += c[0] * left;
  d[m - 1] += c[N - 1] * right;
  for (std::size_t i = 1; i < m; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * cc[i - 1];
    d[i] -= w * d[i - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = d[m - 1] / b[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (d[i] - cc[i] * x[i + 1]) / b[i];
  std::vector<double> f{left};
  f.insert(f.end(), x.begin(), x.end());
  f.push_back(right);
  return f;
}

DirichletProblem segment_problem(const Environment& env, double left, double right) {
  const std::size_t n = env.size();
  DirichletProblem p{&env, VertexMask(n, 1), ScalarField(n, 0.0), false};
  p.interior[0] = p.interior[n - 1] = 0;
  p.boundary[0] = left;
  p.boundary[n - 1] = right;
  return p;
}

DirichletProblem random_box_problem(const Environment& env, std::uint64_t seed) {
  const Lattice& lat = env.lattice();
  DirichletProblem p{&env, VertexMask(env.size(), 1), ScalarField(env.size(), 0.0), false};
  CounterRng rng(seed, 0);
  for (Vertex x = 0; x < env.size(); ++x)
    if (lat.on_outer_face(x)) {
      p.interior[x] = 0;
      p.boundary[x] = rng.uniform(-3.0, 5.0);
    }
  return p;
}

}  // namespace

TEST(Energy, ConstantAndPathExample) {
  const auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 3, BoundaryMode::free), 0);
  EXPECT_EQ(dirichlet_energy(env, ScalarField(3, 4.2)), 0.0);
  EXPECT_DOUBLE_EQ(dirichlet_energy(env, {0, 1, 2}, VertexMask{0, 1, 0}), 2.0);
  EXPECT_DOUBLE_EQ(dirichlet_energy(env.scaled(2.0), {0, 1, 2}, VertexMask{0, 1, 0}), 4.0);
}

TEST(Relaxation, SweepExamplesAndMonotonicity) {
  const auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 3, BoundaryMode::free), 0);
  ScalarField f{0, 7, 1};
  relaxation_sweep(env, f, {0, 1, 0});
  EXPECT_DOUBLE_EQ(f[1], 0.5);
  ScalarField h{0, 1, 2};
  relaxation_sweep(env, h, {0, 1, 0});
  EXPECT_EQ(h, (ScalarField{0, 1, 2}));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto e2 = build_environment(elliptic(), Lattice::cube(2, 12, BoundaryMode::free), seed);
    auto prob = random_box_problem(e2, seed);
    ScalarField g = prob.boundary;
    CounterRng rng(seed, 1);
    for (Vertex x = 0; x < e2.size(); ++x)
      if (prob.interior[x]) g[x] = rng.uniform(-10, 10);
    double lo = *std::min_element(g.begin(), g.end()), hi = *std::max_element(g.begin(), g.end());
    double energy = dirichlet_energy(e2, g, prob.interior);
    for (int sweep = 0; sweep < 50; ++sweep) {
      relaxation_sweep(e2, g, prob.interior);
      const double now = dirichlet_energy(e2, g, prob.interior);
      EXPECT_LE(now, energy + 1e-12 * (1 + energy));
      energy = now;
      for (double v : g) {
        EXPECT_GE(v, lo - 1e-12);
        EXPECT_LE(v, hi + 1e-12);
      }
    }
  }
}

TEST(Relaxation, DegenerateVertexRejected) {
  auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 3, BoundaryMode::free), 0);
  env.set_forward(0, 0, 0.0);
  env.set_forward(1, 0, 0.0);
  ScalarField f{0, 1, 2};
  EXPECT_THROW(relaxation_sweep(env, f, {0, 1, 0}), DegenerateVertexError);
}

TEST(SolveDirichlet, ConstantData) {
  const auto env = build_environment(elliptic(), Lattice::cube(2, 10, BoundaryMode::free), 1);
  auto p = random_box_problem(env, 1);
  for (Vertex x = 0; x < env.size(); ++x) p.boundary[x] = 3.5;
  for (auto m : {SolverMethod::relaxation, SolverMethod::conjugate_gradient}) {
    const auto r = solve_dirichlet(p, {m});
    for (double v : r.f) EXPECT_NEAR(v, 3.5, 1e-9);
  }
}

TEST(SolveDirichlet, SegmentMatchesTridiagonalOracle) {
  const auto unit = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 21, BoundaryMode::free), 0);
  const auto lin = solve_dirichlet(segment_problem(unit, 0.0, 1.0));
  for (Vertex k = 0; k <= 20; ++k) EXPECT_NEAR(lin.f[k], static_cast<double>(k) / 20.0, 1e-10);

  const auto env = build_environment(EnvironmentLaw::iid(Distribution::log_uniform(0.01, 100)), Lattice::cube(1, 41, BoundaryMode::free), 5);
  std::vector<double> c;
  for (Vertex v = 0; v < 40; ++v) c.push_back(env.forward(v, 0));
  const auto oracle = tridiagonal_harmonic(c, -2.0, 3.0);
  for (auto m : {SolverMethod::relaxation, SolverMethod::conjugate_gradient}) {
    const auto r = solve_dirichlet(segment_problem(env, -2.0, 3.0), {m, 1e-12});
    for (Vertex k = 0; k <= 40; ++k) EXPECT_NEAR(r.f[k], oracle[k], 1e-9);
  }
}

TEST(SolveDirichlet, MethodsAgreeAndMaximumPrinciple) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const int d = 2 + static_cast<int>(seed % 2);
    const auto env = build_environment(elliptic(), Lattice::cube(d, d == 2 ? 14 : 7, BoundaryMode::free), seed);
    const auto p = random_box_problem(env, seed + 10);
    const double tol = 1e-10;
    const auto a = solve_dirichlet(p, {SolverMethod::relaxation, tol});
    const auto b = solve_dirichlet(p, {SolverMethod::conjugate_gradient, tol});
    double gmax = 1.0, lo = 1e300, hi = -1e300;
    for (Vertex x = 0; x < env.size(); ++x)
      if (!p.interior[x]) {
        gmax = std::max(gmax, std::abs(p.boundary[x]));
        lo = std::min(lo, p.boundary[x]);
        hi = std::max(hi, p.boundary[x]);
      }
    EXPECT_LE(a.residual, tol * gmax);
    EXPECT_LE(b.residual, tol * gmax);
    // Agreement measured in residual units: both residuals are <= tol * gmax.
    const auto La = laplacian(env, a.f), Lb = laplacian(env, b.f);
    for (Vertex x = 0; x < env.size(); ++x) {
      if (!p.interior[x]) continue;
      EXPECT_LE(std::abs(La[x] - Lb[x]), 10 * tol * gmax);
      EXPECT_GE(b.f[x], lo - 1e-8);
      EXPECT_LE(b.f[x], hi + 1e-8);
    }
    double diff = 0.0;
    for (Vertex x = 0; x < env.size(); ++x) diff = std::max(diff, std::abs(a.f[x] - b.f[x]));
    EXPECT_LT(diff, 1e-7);
  }
}

TEST(SolveDirichlet, IterationCapRaisesSolverError) {
  const auto env = build_environment(elliptic(), Lattice::cube(2, 30, BoundaryMode::free), 2);
  const auto p = random_box_problem(env, 2);
  try {
    solve_dirichlet(p, {SolverMethod::conjugate_gradient, 1e-10, 3});
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 0.0);
    EXPECT_EQ(e.iterations(), 3u);
  }
}

TEST(SolveDirichlet, IllPosedPieceRejected) {
  auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 5, BoundaryMode::free), 0);
  env.set_forward(0, 0, 0.0);
  env.set_forward(3, 0, 0.0);
  DirichletProblem p{&env, {0, 1, 1, 1, 0}, ScalarField(5, 0.0), false};
  EXPECT_THROW(solve_dirichlet(p), PreconditionError);
  p.zero_on_isolated = true;
  EXPECT_NO_THROW(solve_dirichlet(p));
}

TEST(Resistance, SeriesPathAgainstOneUnknownMinimisation) {
  for (auto [c1, c2] : {std::pair{1.0, 1.0}, std::pair{0.3, 5.0}, std::pair{2.0, 0.01}}) {
    Environment env(Lattice::make({3}, BoundaryMode::free));
    env.set_forward(0, 0, c1);
    env.set_forward(1, 0, c2);
    // Oracle: minimise c1 (1 - m)^2 + c2 m^2 over m by golden-section search.
    double lo = 0.0, hi = 1.0;
    auto E = [&](double m) { return c1 * (1 - m) * (1 - m) + c2 * m * m; };
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int i = 0; i < 200; ++i) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      (E(a) < E(b) ? hi : lo) = (E(a) < E(b) ? b : a);
    }
    const double brute = 1.0 / E(0.5 * (lo + hi));
    const double R = effective_resistance(env, 0, 2).value;
    EXPECT_NEAR(R, brute, 1e-9 * brute);
    EXPECT_NEAR(R, 1 / c1 + 1 / c2, 1e-9 * R);
  }
}

TEST(Resistance, UnitFourCycle) {
  const auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 4, BoundaryMode::periodic), 0);
  EXPECT_NEAR(effective_resistance(env, 0, 1).value, 0.75, 1e-10);
  EXPECT_NEAR(oracle_resistance(env, 0, 1), 0.75, 1e-12);
}

TEST(Resistance, RandomGraphsMatchPseudoInverseAndAreSymmetric) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.1, 3.0)),
                                       Lattice::cube(2, 5, seed % 2 ? BoundaryMode::periodic : BoundaryMode::free), seed);
    const Vertex a = seed % 25, b = (seed * 7 + 3) % 25;
    if (a == b) continue;
    const double R = effective_resistance(env, a, b, {SolverMethod::conjugate_gradient, 1e-12}).value;
    EXPECT_NEAR(R, oracle_resistance(env, a, b), 1e-9);
    EXPECT_NEAR(R, effective_resistance(env, b, a, {SolverMethod::conjugate_gradient, 1e-12}).value, 1e-9);
  }
}

TEST(Resistance, DisconnectedIsInfinite) {
  auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 5, BoundaryMode::free), 0);
  env.set_forward(2, 0, 0.0);
  EXPECT_TRUE(std::isinf(effective_resistance(env, 0, 4).value));
}

TEST(Resistance, NearestNeighbourApproachesOneHalf) {
  double prev = 1e9;
  for (int side : {9, 17, 33, 65}) {
    auto lat = Lattice::cube(2, side, BoundaryMode::free);
    const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
    const Vertex x = lat->origin();
    const Vertex y = static_cast<Vertex>(lat->neighbor(x, 0));
    const double R = effective_resistance(env, x, y).value;
    EXPECT_GT(R, 0.5);
    EXPECT_LT(R, prev);
    prev = R;
  }
  EXPECT_NEAR(prev, 0.5, 0.01);
}

TEST(Escape, OneDimensionalGamblersRuin) {
  for (long N : {2L, 5L, 10L}) {
    auto lat = Lattice::cube(1, static_cast<int>(2 * N + 5), BoundaryMode::free);
    const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
    EXPECT_NEAR(escape_conductance(env, lat->origin(), lat->origin(), N).value, 2.0 / static_cast<double>(N), 1e-10);
  }
}

TEST(Escape, MonteCarloAgreement) {
  auto lat = Lattice::cube(2, 13, BoundaryMode::free);
  const auto env = build_environment(elliptic(), lat, 4);
  const Vertex o = lat->origin();
  const long N = 4;
  const double C = escape_conductance(env, o, o, N).value;
  auto target = box_complement(*lat, o, N);
  target[o] = 1;
  std::vector<double> escaped;
  for (std::size_t i = 0; i < 20000; ++i) {
    const auto hit = first_hit(env, o, target, 77, i, 1000000, false);
    escaped.push_back(*hit != o ? 1.0 : 0.0);
  }
  const double est = env.pi(o) * stats::mean(escaped);
  EXPECT_NEAR(est, C, 3 * env.pi(o) * stats::standard_error(escaped));
}

TEST(Escape, RayleighMonotoneAndPreconditions) {
  auto lat = Lattice::cube(2, 11, BoundaryMode::free);
  auto env = build_environment(elliptic(), lat, 9);
  const Vertex o = lat->origin();
  CounterRng rng(3, 3);
  double base = escape_conductance(env, o, o, 4).value;
  for (int trial = 0; trial < 20; ++trial) {
    const Vertex v = static_cast<Vertex>(rng() % env.size());
    const int dir = static_cast<int>(rng() % 2);
    if (!lat->has_forward_edge(v, dir)) continue;
    env.set_forward(v, dir, env.forward(v, dir) + rng.uniform(0.0, 2.0));
    const double now = escape_conductance(env, o, o, 4).value;
    EXPECT_GE(now, base - 1e-9);
    base = now;
  }
  EXPECT_THROW(escape_conductance(env, lat->index(Point{9, 5}), o, 4), PreconditionError);
  EXPECT_THROW(escape_conductance(env, o, o, 6), GeometryError);
}

TEST(Plate, HomogeneousSlabIsLinear) {
  const long N = 6;
  auto lat = Lattice::make({8, 2 * static_cast<int>(N) + 1}, BoundaryMode::periodic);
  const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
  const auto r = plate_potential(env, N);
  for (Vertex x = 0; x < env.size(); ++x) {
    const double h = static_cast<double>(lat->coord(x, 1) - N);
    EXPECT_NEAR(r.f[x], h / static_cast<double>(N), 1e-9);
  }
}

TEST(Plate, AntisymmetryAndMonteCarlo) {
  const long N = 5;
  auto lat = Lattice::make({9, 2 * static_cast<int>(N) + 1}, BoundaryMode::free);
  // Height-symmetric environment: mirror a random one.
  auto env = build_environment(elliptic(), lat, 3);
  lat->for_each_edge([&](Vertex v, int dir) {
    Point p = lat->coords(v);
    Point q = p;
    q[1] = 2 * N - p[1] - (dir == 1 ? 1 : 0);
    if (q[1] > p[1] || (q[1] == p[1] && dir == 1)) return;
    env.set_forward(lat->index(q), dir, env.forward(v, dir));
  });
  const auto r = plate_potential(env, N);
  for (Vertex x = 0; x < env.size(); ++x) {
    Point q = lat->coords(x);
    q[1] = 2 * N - q[1];
    EXPECT_NEAR(r.f[x], -r.f[lat->index(q)], 1e-9);
  }

  const auto perc = build_environment(EnvironmentLaw::percolation(0.7), lat, 12);
  const auto phi = plate_potential(perc, N);
  VertexMask plates(perc.size(), 0);
  for (Vertex x = 0; x < perc.size(); ++x) plates[x] = (lat->coord(x, 1) == 0 || lat->coord(x, 1) == 2 * N);
  Vertex start = lat->origin();
  ASSERT_GT(perc.pi(start), 0.0);
  std::vector<double> sample;
  for (std::size_t i = 0; i < 20000; ++i) {
    const auto hit = first_hit(perc, start, plates, 5, i, 10000000);
    sample.push_back(hit ? (lat->coord(*hit, 1) == 2 * N ? 1.0 : -1.0) : 0.0);
  }
  EXPECT_NEAR(stats::mean(sample), phi.f[start], 3 * stats::standard_error(sample) + 1e-12);
}

TEST(BoxConductance, HomogeneousExactAndZero) {
  for (int d : {1, 2, 3}) {
    for (long N : {2L, 4L}) {
      auto lat = Lattice::cube(d, static_cast<int>(2 * N + 1), BoundaryMode::free);
      const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
      const double expected = 2.0 * static_cast<double>(N) * std::pow(2.0 * static_cast<double>(N) + 1, d - 1);
      EXPECT_NEAR(box_conductance(env, N).value, expected, 1e-8 * expected);
      EXPECT_EQ(box_conductance(build_environment(EnvironmentLaw::constant(0.0), lat, 0), N).value, 0.0);
    }
  }
}

TEST(BoxConductance, MonotoneInConductances) {
  auto lat = Lattice::cube(2, 9, BoundaryMode::free);
  auto env = build_environment(EnvironmentLaw::percolation(0.6), lat, 1);
  CounterRng rng(2, 2);
  double base = box_conductance(env, 4).value;
  for (int trial = 0; trial < 20; ++trial) {
    const Vertex v = static_cast<Vertex>(rng() % env.size());
    const int dir = static_cast<int>(rng() % 2);
    if (!lat->has_forward_edge(v, dir)) continue;
    env.set_forward(v, dir, env.forward(v, dir) + 1.0);
    const double now = box_conductance(env, 4).value;
    EXPECT_GE(now, base - 1e-8);
    base = now;
  }
}

TEST(Greens, SingletonSymmetryAndSegment) {
  auto lat = Lattice::cube(2, 6, BoundaryMode::free);
  const auto env = build_environment(elliptic(), lat, 7);
  VertexMask single(env.size(), 0);
  single[14] = 1;
  EXPECT_NEAR(greens_function(env, single, 14, 14), 1.0, 1e-12);

  VertexMask L(env.size(), 0);
  for (Vertex x = 0; x < env.size(); ++x) L[x] = !lat->on_outer_face(x);
  const SolverOptions tight{SolverMethod::conjugate_gradient, 1e-13};
  for (Vertex x : {7u, 9u, 14u, 21u})
    for (Vertex y : {8u, 15u, 28u}) {
      if (!L[x] || !L[y]) continue;
      EXPECT_NEAR(env.pi(x) * greens_function(env, L, x, y, tight), env.pi(y) * greens_function(env, L, y, x, tight), 1e-9);
    }

  const int N = 12;
  const auto seg = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, N + 1, BoundaryMode::free), 0);
  VertexMask inner(seg.size(), 1);
  inner[0] = inner[static_cast<Vertex>(N)] = 0;
  for (int k = 1; k < N; ++k) {
    const double escape = 0.5 * (1.0 / k + 1.0 / (N - k));  // gambler's ruin from k
    const double G = greens_function(seg, inner, static_cast<Vertex>(k), static_cast<Vertex>(k), tight);
    EXPECT_NEAR(G, 1.0 / escape, 1e-9);
    EXPECT_NEAR(G, 2.0 * k * (N - k) / N, 1e-9);
  }
  EXPECT_THROW(greens_function(build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(1, 5, BoundaryMode::periodic), 0),
                               VertexMask(5, 1), 0, 1),
               ConsistencyError);
}

TEST(Poisson, ZeroDipoleAndLinearity) {
  auto lat = Lattice::cube(2, 7, BoundaryMode::periodic);
  const auto env = build_environment(elliptic(), lat, 5);
  const SolverOptions tight{SolverMethod::conjugate_gradient, 1e-13};
  const auto zero = solve_poisson(env, ScalarField(env.size(), 0.0), 0);
  for (double v : zero.f) EXPECT_EQ(v, 0.0);

  ScalarField dip(env.size(), 0.0);
  dip[3] = 1.0;
  dip[30] = -1.0;
  const auto phi = solve_poisson(env, dip, 0, tight);
  EXPECT_NEAR(phi.f[0], 0.0, 1e-15);
  EXPECT_NEAR(phi.f[3] - phi.f[30], -effective_resistance(env, 3, 30, tight).value, 1e-9);

  ScalarField r1(env.size()), r2(env.size());
  CounterRng rng(4, 4);
  for (auto& v : r1) v = rng.uniform(-1, 1);
  for (auto& v : r2) v = rng.uniform(-1, 1);
  const double m1 = stats::mean(r1), m2 = stats::mean(r2);
  for (auto& v : r1) v -= m1;
  for (auto& v : r2) v -= m2;
  ScalarField mix(env.size());
  for (Vertex x = 0; x < env.size(); ++x) mix[x] = 2.0 * r1[x] - 3.0 * r2[x];
  const auto p1 = solve_poisson(env, r1, 0, tight), p2 = solve_poisson(env, r2, 0, tight), pm = solve_poisson(env, mix, 0, tight);
  for (Vertex x = 0; x < env.size(); ++x) EXPECT_NEAR(pm.f[x], 2.0 * p1.f[x] - 3.0 * p2.f[x], 1e-9);
  const auto Lp = laplacian(env, pm.f);
  for (Vertex x = 0; x < env.size(); ++x) EXPECT_NEAR(Lp[x], mix[x], 1e-11);
}

TEST(Poisson, NonzeroChargeAndAbsorbingDomain) {
  auto lat = Lattice::cube(2, 6, BoundaryMode::periodic);
  const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
  ScalarField rho(env.size(), 0.0);
  rho[4] = 1.0;
  EXPECT_THROW(solve_poisson(env, rho, 0), ConsistencyError);

  auto abs_lat = Lattice::cube(2, 7, BoundaryMode::absorbing);
  const auto a = build_environment(elliptic(), abs_lat, 2);
  ScalarField point(a.size(), 0.0);
  const Vertex o = abs_lat->origin();
  point[o] = -a.pi(o);
  const auto sol = solve_poisson(a, point, o, {SolverMethod::conjugate_gradient, 1e-13});
  VertexMask inside(a.size(), 0);
  for (Vertex x = 0; x < a.size(); ++x) inside[x] = !abs_lat->is_absorbing(x);
  EXPECT_NEAR(sol.f[o], greens_function(a, inside, o, o, {SolverMethod::conjugate_gradient, 1e-13}), 1e-9);
}
