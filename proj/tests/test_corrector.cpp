#include <gtest/gtest.h>

#include <cmath>

#include "rcm/corrector.hpp"
#include "rcm/stats.hpp"

using namespace rcm;

namespace {

SolverOptions tight() {
  SolverOptions o;
  o.tol = 1e-11;
  return o;
}

// d = 1 corrector from the cumulative resistance: Psi(x) = C sum_{k<x} 1/omega_k.
ScalarField cycle_corrector(const Environment& env) {
  const auto n = env.size();
  double inv_sum = 0.0;
  for (Vertex v = 0; v < n; ++v) inv_sum += 1.0 / env.forward(v, 0);
  const double c = static_cast<double>(n) / inv_sum;
  ScalarField chi(n);
  double psi = 0.0;
  for (Vertex v = 0; v < n; ++v) {
    chi[v] = psi - static_cast<double>(v);
    psi += c / env.forward(v, 0);
  }
  double mean = 0.0;
  for (double x : chi) mean += x;
  mean /= static_cast<double>(n);
  for (double& x : chi) x -= mean;
  return chi;
}

}  // namespace

TEST(Corrector, HomogeneousTorusIsTrivial) {
  const auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(2, 8, BoundaryMode::periodic), 0);
  const auto chi = periodized_corrector(env);
  for (const auto& c : chi)
    for (double x : c) EXPECT_NEAR(x, 0.0, 1e-12);
  const auto dm = diffusion_matrix(env, chi);
  EXPECT_TRUE(dm.q.isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-12));
  EXPECT_DOUBLE_EQ(dm.mean_pi, 4.0);
  EXPECT_NEAR(dm.discrete_covariance()(0, 0), 0.5, 1e-12);
}

TEST(Corrector, CycleMatchesCumulativeResistance) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::log_uniform(0.1, 10.0)),
                                     Lattice::cube(1, 300, BoundaryMode::periodic), 5);
  const auto chi = periodized_corrector(env, nullptr, tight());
  const auto oracle = cycle_corrector(env);
  for (Vertex v = 0; v < env.size(); ++v) EXPECT_NEAR(chi[0][v], oracle[v], 1e-7);
  double inv = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) inv += 1.0 / env.forward(v, 0);
  const double harmonic = static_cast<double>(env.size()) / inv;
  const auto dm = diffusion_matrix(env, chi);
  EXPECT_NEAR(dm.q(0, 0), harmonic, 1e-9);
}

TEST(Corrector, LineConstantHasNoCorrector) {
  const auto env = build_environment(EnvironmentLaw::line_constant(Distribution::uniform(0.5, 2.0)),
                                     Lattice::cube(2, 12, BoundaryMode::periodic), 3);
  const auto chi = periodized_corrector(env);
  for (const auto& c : chi)
    for (double x : c) EXPECT_NEAR(x, 0.0, 1e-12);
  const auto dm = diffusion_matrix(env, chi);
  for (int dir = 0; dir < 2; ++dir) {
    double s = 0.0;
    std::size_t n = 0;
    env.lattice().for_each_edge([&](Vertex v, int d) {
      if (d == dir) { s += env.forward(v, d); ++n; }
    });
    EXPECT_NEAR(dm.q(dir, dir), s / static_cast<double>(n), 1e-12);
  }
  EXPECT_NEAR(dm.q(0, 1), 0.0, 1e-12);
}

TEST(Corrector, SolvesCellProblemAndHasZeroMean) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.2, 3.0)),
                                     Lattice::cube(2, 16, BoundaryMode::periodic), 9);
  const auto chi = periodized_corrector(env, nullptr, tight());
  for (int i = 0; i < 2; ++i) {
    const auto drift = position_laplacian(env, i);
    double mean = 0.0;
    for (Vertex v = 0; v < env.size(); ++v) {
      EXPECT_NEAR(laplacian_at(env, chi[static_cast<std::size_t>(i)], v), -drift[v], 1e-8);
      mean += chi[static_cast<std::size_t>(i)][v];
    }
    EXPECT_NEAR(mean / static_cast<double>(env.size()), 0.0, 1e-12);
  }
}

TEST(Corrector, VariationalBoundsAndMinimality) {
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::two_point(1.0, 0.5, 2.0)),
                                     Lattice::cube(2, 24, BoundaryMode::periodic), 21);
  const auto chi = periodized_corrector(env, nullptr, tight());
  const auto dm = diffusion_matrix(env, chi);
  double s = 0.0, inv = 0.0;
  std::size_t n = 0;
  env.lattice().for_each_edge([&](Vertex v, int d) {
    s += env.forward(v, d);
    inv += 1.0 / env.forward(v, d);
    ++n;
  });
  const double arith = s / static_cast<double>(n), harm = static_cast<double>(n) / inv;
  for (int i = 0; i < 2; ++i) {
    EXPECT_GT(dm.q(i, i), harm - 0.05);
    EXPECT_LT(dm.q(i, i), arith);
  }
  EXPECT_GT(dm.min_eigenvalue(), 0.0);
  EXPECT_NEAR(dm.q(0, 1), dm.q(1, 0), 1e-14);

  const std::vector<double> lambda{0.6, 0.8};
  const double e0 = corrector_energy(env, chi, lambda);
  EXPECT_NEAR(e0, 0.36 * dm.q(0, 0) + 0.64 * dm.q(1, 1) + 0.96 * dm.q(0, 1), 1e-10);
  CounterRng rng(4, 0);
  for (int trial = 0; trial < 5; ++trial) {
    auto pert = chi;
    for (auto& c : pert)
      for (double& x : c) x += 0.05 * (rng.uniform() - 0.5);
    EXPECT_GT(corrector_energy(env, pert, lambda), e0);
  }
}

TEST(Corrector, PercolationUsesWorkingComponent) {
  const auto env = build_environment(EnvironmentLaw::percolation(0.7), Lattice::cube(2, 20, BoundaryMode::periodic), 2);
  const auto lab = label_clusters(env);
  const auto mask = vertex_mask(env.size(), default_working_cluster(lab));
  const auto chi = periodized_corrector(env);
  for (Vertex v = 0; v < env.size(); ++v) {
    if (!mask[v]) {
      EXPECT_EQ(chi[0][v], 0.0);
    } else {
      EXPECT_NEAR(laplacian_at(env, chi[0], v), -position_laplacian(env, 0)[v], 1e-7);
    }
  }
  const auto dm = diffusion_matrix(env, chi);
  EXPECT_GT(dm.q(0, 0), 0.0);
  EXPECT_LT(dm.q(0, 0), 0.7);
}

TEST(Corrector, RejectsBoxes) {
  const auto env = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(2, 5, BoundaryMode::free), 0);
  EXPECT_THROW(periodized_corrector(env), PreconditionError);
  const auto tor = build_environment(EnvironmentLaw::constant(1.0), Lattice::cube(2, 5, BoundaryMode::periodic), 0);
  EXPECT_THROW(harmonic_embedding(tor), GeometryError);
}

TEST(HarmonicEmbedding, HomogeneousIsIdentity) {
  auto lat = Lattice::cube(2, 9, BoundaryMode::free);
  const auto env = build_environment(EnvironmentLaw::constant(1.0), lat, 0);
  const auto psi = harmonic_embedding(env, nullptr, tight());
  for (Vertex v = 0; v < env.size(); ++v)
    for (int i = 0; i < 2; ++i)
      EXPECT_NEAR(psi[static_cast<std::size_t>(i)][v], static_cast<double>(lat->coord(v, i) - 4), 1e-9);
}

TEST(HarmonicEmbedding, HarmonicInsideWithPinnedBoundary) {
  auto lat = Lattice::cube(2, 15, BoundaryMode::free);
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.1, 5.0)), lat, 6);
  const auto psi = harmonic_embedding(env, nullptr, tight());
  for (Vertex v = 0; v < env.size(); ++v) {
    for (int i = 0; i < 2; ++i) {
      const auto& f = psi[static_cast<std::size_t>(i)];
      if (lat->on_outer_face(v)) {
        EXPECT_DOUBLE_EQ(f[v], static_cast<double>(lat->coord(v, i) - 7));
      } else {
        EXPECT_NEAR(laplacian_at(env, f, v), 0.0, 1e-8);
      }
    }
  }
}

TEST(HarmonicEmbedding, OffClusterIsNan) {
  auto lat = Lattice::cube(2, 21, BoundaryMode::free);
  const auto env = build_environment(EnvironmentLaw::percolation(0.8), lat, 3);
  const auto lab = label_clusters(env);
  const auto mask = vertex_mask(env.size(), working_cluster(lab, CrossingPolicy{}));
  const auto psi = harmonic_embedding(env, &mask);
  for (Vertex v = 0; v < env.size(); ++v) EXPECT_EQ(std::isnan(psi[0][v]), !mask[v]);
}

TEST(Nondegeneracy, EqualityOnCycleAndBoundInTwoDimensions) {
  const auto line = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.3, 3.0)),
                                      Lattice::cube(1, 200, BoundaryMode::periodic), 7);
  const auto dm1 = diffusion_matrix(line, periodized_corrector(line, nullptr, tight()));
  EXPECT_NEAR(nondegeneracy_lower_bound(line)[0], dm1.discrete_covariance()(0, 0), 1e-9);

  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.3, 3.0)),
                                     Lattice::cube(2, 24, BoundaryMode::periodic), 8);
  const auto dm = diffusion_matrix(env, periodized_corrector(env, nullptr, tight()));
  const auto lb = nondegeneracy_lower_bound(env);
  for (int i = 0; i < 2; ++i) EXPECT_GE(dm.discrete_covariance()(i, i), lb[static_cast<std::size_t>(i)] - 1e-3);

  const auto perc = build_environment(EnvironmentLaw::percolation(0.7), Lattice::cube(2, 10, BoundaryMode::periodic), 1);
  EXPECT_EQ(nondegeneracy_lower_bound(perc)[0], 0.0);
}

TEST(Sublinearity, RatioDecaysOnCycle) {
  auto lat = Lattice::cube(1, 8192, BoundaryMode::periodic);
  const auto env = build_environment(EnvironmentLaw::iid(Distribution::uniform(0.5, 2.0)), lat, 11);
  const auto chi = periodized_corrector(env, nullptr, tight());
  const std::vector<long> radii{16, 32, 64, 128, 256, 512, 1024, 2048};
  const auto prof = sublinearity_profile(*lat, chi, lat->origin(), radii, {0.1, 0.5}, 2.0);
  std::vector<double> n, r;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    n.push_back(static_cast<double>(radii[k]));
    r.push_back(prof.max_ratio[k]);
  }
  EXPECT_LT(stats::loglog_fit(n, r).slope, -0.2);
  EXPECT_LT(prof.max_ratio.back(), prof.max_ratio.front());
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_LE(prof.violation_fraction[e].back(), prof.violation_fraction[e].front() + 1e-12);
    for (double g : prof.good_density[e]) {
      EXPECT_GE(g, 0.0);
      EXPECT_LE(g, 1.0);
    }
  }
  EXPECT_GE(prof.good_density[1].back(), prof.good_density[0].back());
}

TEST(Sublinearity, ZeroFieldIsEverywhereGood) {
  auto lat = Lattice::cube(2, 16, BoundaryMode::periodic);
  VectorField chi(2, ScalarField(lat->size(), 0.0));
  const auto prof = sublinearity_profile(*lat, chi, lat->origin(), {2, 4, 8}, {0.1}, 0.0);
  for (double r : prof.max_ratio) EXPECT_EQ(r, 0.0);
  for (double g : prof.good_density[0]) EXPECT_EQ(g, 1.0);
  for (double f : prof.violation_fraction[0]) EXPECT_EQ(f, 0.0);
}
