#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rcm/fourier.hpp"
#include "rcm/gradfield.hpp"
#include "rcm/heatkernel.hpp"
#include "rcm/parallel.hpp"
#include "rcm/walk.hpp"

namespace rcm {

/// Macroscopic test function with an analytic tag.
struct MacroscopicProfile {
  std::string tag;
  TestFunction fn;

  double operator()(const std::vector<double>& x) const { return fn.f(x); }
};

/// exp(-|x|^2 / (2 s^2)), truncated at `cut` s.
inline MacroscopicProfile gaussian_bump(double s, double cut = 8.0) {
  if (!(s > 0.0)) throw ParameterError("profile.s", "must be positive");
  return {"gaussian_bump",
          {[s](const std::vector<double>& x) {
             double r2 = 0.0;
             for (double c : x) r2 += c * c;
             return std::exp(-r2 / (2 * s * s));
           },
           cut * s}};
}

/// Derivative of the Gaussian bump along `dir` (zero integral).
inline MacroscopicProfile dipole(int dir, double s, double cut = 8.0) {
  if (!(s > 0.0)) throw ParameterError("profile.s", "must be positive");
  return {"dipole", gaussian_derivative(dir, s, cut)};
}

/// Piecewise-constant profile on a row-major grid covering [-L/2, L/2)^d.
inline MacroscopicProfile grid_profile(std::vector<double> values, std::vector<int> dims, double box_length) {
  std::size_t total = 1;
  for (int n : dims) total *= static_cast<std::size_t>(n);
  if (dims.empty() || total != values.size()) throw ParameterError("profile.grid", "size does not match dims");
  return {"custom_grid",
          {[values = std::move(values), dims, box_length](const std::vector<double>& x) {
             std::size_t idx = 0;
             for (std::size_t i = 0; i < dims.size(); ++i) {
               const double u = (x[i] + 0.5 * box_length) / box_length * dims[i];
               if (u < 0.0 || u >= dims[i]) return 0.0;
               idx = idx * static_cast<std::size_t>(dims[i]) + static_cast<std::size_t>(u);
             }
             return values[idx];
           },
           0.5 * box_length}};
}

/// int f over R^d by midpoint quadrature on the support box.
inline double profile_integral(const MacroscopicProfile& p, int d, int points = 256) {
  const double L = 2.0 * p.fn.support, h = L / points;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(points);
  const std::vector<int> dims(static_cast<std::size_t>(d), points);
  std::vector<double> x(static_cast<std::size_t>(d));
  double s = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = -0.5 * L + h * (m[static_cast<std::size_t>(i)] + 0.5);
    s += p(x);
  }
  return s * std::pow(h, d);
}

/// Cell averages u0(z) = int_{cell z} f(eps x) dx.
inline ScalarField initial_data(const Lattice& lat, const MacroscopicProfile& f, double eps) {
  return detail::cell_integrals(lat, f.fn, eps);
}

enum class CauchyMethod { exact_semigroup, monte_carlo };

struct CauchySolution {
  ScalarField u;
  ScalarField standard_error;  // Monte Carlo only
  CauchyMethod method = CauchyMethod::exact_semigroup;
  std::size_t samples = 0;
};

/// u_eps(t, z) = E^z u0(Y_{t / eps^2}) for the VSRW. Monte Carlo evaluates only
/// the `probes` (NaN elsewhere); an empty probe list means every vertex.
inline CauchySolution solve_cauchy_discrete(const Environment& env, const MacroscopicProfile& f, double t, double eps,
                                            CauchyMethod method = CauchyMethod::exact_semigroup,
                                            std::uint64_t seed = 0, std::size_t samples = 0,
                                            const std::vector<Vertex>& probes = {}) {
  if (!(t >= 0.0)) throw ParameterError("t", "must be nonnegative");
  const auto u0 = initial_data(env.lattice(), f, eps);
  const double T = t / (eps * eps);
  CauchySolution sol;
  sol.method = method;
  if (method == CauchyMethod::exact_semigroup) {
    sol.u = vsrw_semigroup(env, u0, T);
    return sol;
  }
  if (samples == 0) throw ParameterError("samples", "must be positive");
  sol.samples = samples;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  sol.u.assign(env.size(), nan);
  sol.standard_error.assign(env.size(), nan);
  std::vector<Vertex> pts = probes;
  if (pts.empty())
    for (Vertex v = 0; v < env.size(); ++v) pts.push_back(v);
  for (Vertex x : pts) {
    std::vector<double> vals(samples);
    for (std::size_t i = 0; i < samples; ++i)
      vals[i] = u0[position_at(simulate_vsrw(env, x, T, seed, x * samples + i), T)];
    sol.u[x] = stats::mean(vals);
    sol.standard_error[x] = samples > 1 ? stats::standard_error(vals) : nan;
  }
  return sol;
}

/// Spectral solution of d_t u = div(q grad u) on the periodic grid
/// (box length L, row-major samples): u_hat(k) e^{-t k.qk}.
inline std::vector<double> homogenized_solution(const Eigen::MatrixXd& q, const std::vector<double>& samples,
                                                const std::vector<int>& dims, double box_length, double t) {
  const int d = static_cast<int>(dims.size());
  if (q.rows() != d || q.cols() != d) throw ParameterError("q", "dimension mismatch");
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().minCoeff() <= 0.0)
    throw ConsistencyError("diffusion matrix is singular");
  if (t == 0.0) return samples;
  std::vector<std::complex<double>> data(samples.begin(), samples.end());
  fourier::transform(data, dims, -1);
  std::vector<std::vector<double>> k;
  for (int n : dims) k.push_back(fourier::wavenumbers(n, box_length * n / dims[0]));
  Eigen::VectorXd kv(d);
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) kv[i] = k[static_cast<std::size_t>(i)][static_cast<std::size_t>(m[static_cast<std::size_t>(i)])];
    data[idx] *= std::exp(-t * kv.dot(q * kv));
  }
  fourier::transform(data, dims, 1);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data[i].real() / static_cast<double>(samples.size());
  return out;
}

/// Homogenized solution on the cells of a torus of the eps-lattice, started
/// from the same cell averages as the discrete problem.
inline ScalarField homogenized_solution(const Eigen::MatrixXd& q, const MacroscopicProfile& f, double t,
                                        const Lattice& lat, double eps) {
  if (!lat.periodic()) throw PreconditionError("homogenized solution needs a torus");
  std::vector<int> dims;
  for (int i = 0; i < lat.dim(); ++i) dims.push_back(lat.side(i));
  for (int n : dims)
    if (n != dims[0]) throw PreconditionError("homogenized solution needs a cubic torus");
  return homogenized_solution(q, initial_data(lat, f, eps), dims, eps * dims[0], t);
}

/// L2(dx) distance of two cell-constant fields on the eps-lattice.
inline double l2_distance(const ScalarField& a, const ScalarField& b, double eps, int d) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s * std::pow(eps, d));
}

struct HomogenizationRow {
  double eps = 0.0;
  double error = 0.0;           // sqrt of the sample mean of squared L2 errors
  double standard_error = 0.0;  // of the mean squared error
  std::size_t samples = 0;
};

/// L2 error between the discrete and homogenized solutions at time t, on
/// tori of macroscopic side `box_length`, over `samples` environments per eps.
inline std::vector<HomogenizationRow> homogenization_error(const EnvironmentLaw& law, int dim, const Eigen::MatrixXd& q,
                                                           const MacroscopicProfile& f, double t,
                                                           const std::vector<double>& eps_grid, double box_length,
                                                           std::size_t samples, std::uint64_t seed,
                                                           unsigned workers = 0) {
  std::vector<HomogenizationRow> rows;
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    const double eps = eps_grid[e];
    const int side = static_cast<int>(std::lround(box_length / eps));
    auto lat = Lattice::cube(dim, side, BoundaryMode::periodic);
    const auto ubar = homogenized_solution(q, f, t, *lat, eps);
    std::vector<double> sq(samples);
    parallel_for(samples, [&](std::size_t s) {
      const auto env = build_environment(law, lat, seed + 7919 * e + 104729 * s);
      const auto u = solve_cauchy_discrete(env, f, t, eps).u;
      const double err = l2_distance(u, ubar, eps, dim);
      sq[s] = err * err;
    }, workers);
    HomogenizationRow row;
    row.eps = eps;
    row.samples = samples;
    row.error = std::sqrt(stats::mean(sq));
    row.standard_error = samples > 1 ? stats::standard_error(sq) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

/// <g_eps, (-L)^{-1} f_eps> with f_eps(x) = eps^{d/2+1} f(eps x) integrated over
/// cells. Tori use zero-sum weights; absorbing boxes keep the raw weights.
inline double resolvent_pairing(const Environment& env, const MacroscopicProfile& f, const MacroscopicProfile& g,
                                double eps, const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  const bool zero_sum = lat.mode() != BoundaryMode::absorbing;
  const auto wf = phi_epsilon_weights(lat, f.fn, eps, zero_sum);
  const auto wg = phi_epsilon_weights(lat, g.fn, eps, zero_sum);
  const auto u = solve_poisson(env, wf, 0, opt, PoissonGauge::zero_mean);
  double s = 0.0;
  for (std::size_t v = 0; v < wg.size(); ++v) s -= wg[v] * u.f[v];
  return s;
}

/// Direct Fourier evaluation of <g, (-div q grad)^{-1} f> on the periodic box.
inline double fourier_pairing(const MacroscopicProfile& f, const MacroscopicProfile& g, const Eigen::MatrixXd& q,
                              int grid, double box_length) {
  const int d = static_cast<int>(q.rows());
  const std::vector<int> dims(static_cast<std::size_t>(d), grid);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid);
  const double h = box_length / grid;
  std::vector<std::complex<double>> a(total), b(total);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t idx = 0; idx < total; ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = -0.5 * box_length + h * m[static_cast<std::size_t>(i)];
    a[idx] = f(x);
    b[idx] = g(x);
  }
  fourier::transform(a, dims, -1);
  fourier::transform(b, dims, -1);
  const auto k = fourier::wavenumbers(grid, box_length);
  Eigen::VectorXd kv(d);
  double s = 0.0;
  for (std::size_t idx = 1; idx < total; ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) kv[i] = k[static_cast<std::size_t>(m[static_cast<std::size_t>(i)])];
    s += (a[idx] * std::conj(b[idx])).real() / kv.dot(q * kv);
  }
  return s * std::pow(h, 2 * d) / std::pow(box_length, d);
}

/// Target <g, (-Q)^{-1} f> by polarization of the variance functional.
inline double resolvent_target(const MacroscopicProfile& f, const MacroscopicProfile& g, const Eigen::MatrixXd& q,
                               int grid, double box_length) {
  const double support = std::max(f.fn.support, g.fn.support);
  const TestFunction sum{[&](const std::vector<double>& x) { return f(x) + g(x); }, support};
  const TestFunction diff{[&](const std::vector<double>& x) { return f(x) - g(x); }, support};
  return 0.25 * (gff_variance_target(sum, q, grid, box_length) - gff_variance_target(diff, q, grid, box_length));
}

}  // namespace rcm
