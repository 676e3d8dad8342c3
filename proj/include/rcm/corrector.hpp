#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/potential.hpp"

namespace rcm {

/// Per-coordinate fields: field[i][v] is coordinate i at vertex v.
using VectorField = std::vector<ScalarField>;

/// Harmonic embedding of a box: outer-face vertices of the working cluster
/// stay at their positions (relative to the box centre), every other cluster
/// vertex is moved so that L Psi = 0. Vertices off the cluster get NaN.
inline VectorField harmonic_embedding(const Environment& env, const VertexMask* cluster = nullptr,
                                      const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  if (lat.periodic()) throw GeometryError("harmonic embedding needs a box, not a torus");
  VertexMask in(env.size(), 1);
  if (cluster) in = *cluster;
  const Vertex c = lat.origin();
  VectorField psi(static_cast<std::size_t>(lat.dim()));
  for (int i = 0; i < lat.dim(); ++i) {
    DirichletProblem prob{&env, VertexMask(env.size(), 0), ScalarField(env.size(), 0.0), false};
    for (Vertex x = 0; x < env.size(); ++x) {
      prob.boundary[x] = static_cast<double>(lat.coord(x, i) - lat.coord(c, i));
      prob.interior[x] = in[x] && !lat.on_outer_face(x);
    }
    auto res = solve_dirichlet(prob, opt);
    for (Vertex x = 0; x < env.size(); ++x)
      if (!in[x]) res.f[x] = std::numeric_limits<double>::quiet_NaN();
    psi[static_cast<std::size_t>(i)] = std::move(res.f);
  }
  return psi;
}

/// Unnormalised local drift L x_i = omega(x, x + e_i) - omega(x, x - e_i).
inline ScalarField position_laplacian(const Environment& env, int i) {
  ScalarField v(env.size());
  for (Vertex x = 0; x < env.size(); ++x)
    v[x] = env.omega(x, Lattice::slot_of(i, 1)) - env.omega(x, Lattice::slot_of(i, -1));
  return v;
}

/// Periodized corrector on a torus: L chi_i = -L x_i on the working component,
/// zero mean per coordinate; chi = 0 off the component.
inline VectorField periodized_corrector(const Environment& env, const VertexMask* cluster = nullptr,
                                        const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  if (!lat.periodic()) throw PreconditionError("periodized corrector needs a torus");
  VertexMask comp;
  if (cluster) {
    comp = *cluster;
  } else {
    comp = vertex_mask(env.size(), default_working_cluster(label_clusters(env)));
  }
  Vertex norm = 0;
  while (norm < env.size() && !comp[norm]) ++norm;
  if (norm == env.size()) throw SelectionError("empty working component");
  VectorField chi;
  for (int i = 0; i < lat.dim(); ++i) {
    ScalarField rho = position_laplacian(env, i);
    for (Vertex x = 0; x < env.size(); ++x) rho[x] = comp[x] ? -rho[x] : 0.0;
    chi.push_back(solve_poisson(env, rho, norm, opt, PoissonGauge::zero_mean).f);
  }
  return chi;
}

/// Increment of Psi_i = x_i + chi_i across the edge (v, v + e_dir).
inline double psi_increment(const Environment& env, const VectorField& chi, int i, Vertex v, int dir) {
  const auto y = static_cast<Vertex>(env.lattice().neighbor(v, Lattice::slot_of(dir, 1)));
  const auto& c = chi[static_cast<std::size_t>(i)];
  return (i == dir ? 1.0 : 0.0) + c[y] - c[v];
}

/// Torus Dirichlet energy of lambda . (x + chi) per vertex.
inline double corrector_energy(const Environment& env, const VectorField& chi, const std::vector<double>& lambda) {
  double e = 0.0;
  env.lattice().for_each_edge([&](Vertex v, int dir) {
    double inc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) inc += lambda[i] * psi_increment(env, chi, static_cast<int>(i), v, dir);
    e += env.forward(v, dir) * inc * inc;
  });
  return e / static_cast<double>(env.size());
}

/// Homogenized coefficients. `q` is the generator matrix (the homogeneous unit
/// environment gives the identity); the VSRW covariance is `vsrw_factor * q * t`
/// and the discrete-time covariance per step is `vsrw_factor * q / mean_pi`.
struct DiffusionMatrix {
  Eigen::MatrixXd q;
  double vsrw_factor = 2.0;
  double mean_pi = 1.0;

  Eigen::MatrixXd vsrw_covariance() const { return vsrw_factor * q; }
  Eigen::MatrixXd discrete_covariance() const { return vsrw_factor * q / mean_pi; }
  double min_eigenvalue() const { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().minCoeff(); }
};

/// q_ij = (1/|T|) sum over edges of omega (dPsi_i)(dPsi_j).
inline DiffusionMatrix diffusion_matrix(const Environment& env, const VectorField& chi) {
  const int d = env.dim();
  DiffusionMatrix dm;
  dm.q = Eigen::MatrixXd::Zero(d, d);
  env.lattice().for_each_edge([&](Vertex v, int dir) {
    const double w = env.forward(v, dir);
    if (w == 0.0) return;
    std::vector<double> inc(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) inc[static_cast<std::size_t>(i)] = psi_increment(env, chi, i, v, dir);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) dm.q(i, j) += w * inc[static_cast<std::size_t>(i)] * inc[static_cast<std::size_t>(j)];
  });
  const double vol = static_cast<double>(env.size());
  dm.q /= vol;
  dm.q = 0.5 * (dm.q + dm.q.transpose());
  double pi_sum = 0.0;
  for (Vertex x = 0; x < env.size(); ++x) pi_sum += env.pi(x);
  dm.mean_pi = pi_sum / vol;
  return dm;
}

/// Per-direction lower bound 2 / (E(pi) E(1/omega_i)) on the discrete-time
/// variance, from sample averages over the edges of `env` (0 when some
/// omega_i vanishes).
inline std::vector<double> nondegeneracy_lower_bound(const Environment& env) {
  const Lattice& lat = env.lattice();
  const int d = lat.dim();
  std::vector<double> inv(static_cast<std::size_t>(d), 0.0), count(static_cast<std::size_t>(d), 0.0);
  bool zero[16] = {};
  lat.for_each_edge([&](Vertex v, int dir) {
    const double w = env.forward(v, dir);
    if (w <= 0.0) zero[dir] = true;
    else inv[static_cast<std::size_t>(dir)] += 1.0 / w;
    count[static_cast<std::size_t>(dir)] += 1.0;
  });
  double pi_sum = 0.0;
  for (Vertex x = 0; x < env.size(); ++x) pi_sum += env.pi(x);
  const double mean_pi = pi_sum / static_cast<double>(env.size());
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < d; ++i) {
    if (zero[i]) continue;
    const double mean_inv = inv[static_cast<std::size_t>(i)] / count[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = 2.0 / (mean_pi * mean_inv);
  }
  return out;
}

/// Sublinearity diagnostics of a corrector field around `origin`.
struct SublinearityProfile {
  std::vector<long> radii;
  std::vector<double> max_ratio;                       // max_{|x|<=n} |chi(x) - chi(0)| / n
  std::vector<double> epsilons;
  std::vector<std::vector<double>> violation_fraction;  // [eps][radius]: |chi(x) - chi(0)| >= eps n
  double K = 0.0;
  std::vector<std::vector<double>> good_density;       // [eps][radius]: fraction of (K, eps)-good points
};

inline SublinearityProfile sublinearity_profile(const Lattice& lat, const VectorField& chi, Vertex origin,
                                                const std::vector<long>& radii, const std::vector<double>& epsilons,
                                                double K) {
  SublinearityProfile prof;
  prof.radii = radii;
  prof.epsilons = epsilons;
  prof.K = K;
  const int d = lat.dim();
  auto vec_norm = [&](Vertex a, Vertex b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      const double diff = chi[static_cast<std::size_t>(i)][a] - chi[static_cast<std::size_t>(i)][b];
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  auto radius_of = [&](Vertex x) {
    double s = 0.0;
    for (long c : lat.relative(x, origin)) s += static_cast<double>(c * c);
    return std::sqrt(s);
  };
  // Largest m for which x + m e stays a distinct point of the domain.
  long m_max = std::numeric_limits<long>::max();
  for (int i = 0; i < d; ++i) m_max = std::min<long>(m_max, lat.periodic() ? lat.side(i) / 2 : lat.side(i) - 1);

  // Worst slack per point: max over m, +-e of |chi(x + m e) - chi(x)| - eps m, for each eps.
  auto good = [&](Vertex x, double eps) {
    for (int s = 0; s < lat.slots(); ++s) {
      Vertex y = x;
      for (long m = 1; m <= m_max; ++m) {
        const auto nb = lat.neighbor(y, s);
        if (nb < 0) break;
        y = static_cast<Vertex>(nb);
        if (vec_norm(y, x) > K + eps * static_cast<double>(m)) return false;
      }
    }
    return true;
  };

  prof.violation_fraction.assign(epsilons.size(), {});
  prof.good_density.assign(epsilons.size(), {});
  for (long n : radii) {
    double worst = 0.0;
    std::vector<Vertex> ball;
    for (Vertex x = 0; x < lat.size(); ++x) {
      if (std::isnan(chi[0][x]) || radius_of(x) > static_cast<double>(n)) continue;
      ball.push_back(x);
      worst = std::max(worst, vec_norm(x, origin));
    }
    prof.max_ratio.push_back(worst / static_cast<double>(n));
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
      std::size_t bad = 0, ok = 0;
      for (Vertex x : ball) {
        if (vec_norm(x, origin) >= epsilons[e] * static_cast<double>(n)) ++bad;
        if (good(x, epsilons[e])) ++ok;
      }
      const double size = static_cast<double>(std::max<std::size_t>(ball.size(), 1));
      prof.violation_fraction[e].push_back(static_cast<double>(bad) / size);
      prof.good_density[e].push_back(static_cast<double>(ok) / size);
    }
  }
  return prof;
}

}  // namespace rcm
