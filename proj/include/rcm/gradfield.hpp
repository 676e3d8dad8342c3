#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "rcm/fourier.hpp"
#include "rcm/potential.hpp"
#include "rcm/rng.hpp"

namespace rcm {

// ---------------------------------------------------------------------------
// Mixture potentials
// ---------------------------------------------------------------------------

/// rho = sum_i p_i delta_{kappa_i}.
struct MixtureSpec {
  std::vector<double> atoms;
  std::vector<double> weights;

  static MixtureSpec single(double kappa) { return make({kappa}, {1.0}); }
  static MixtureSpec two_atom(double k1, double p1, double k2) { return make({k1, k2}, {p1, 1.0 - p1}); }

  static MixtureSpec make(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size()) throw ParameterError("mixture", "atoms and weights differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (!(atoms[i] > 0.0 && std::isfinite(atoms[i]))) throw ParameterError("mixture.atoms", "must be positive and finite");
      if (!(weights[i] >= 0.0)) throw ParameterError("mixture.weights", "must be nonnegative");
      total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("mixture.weights", "must sum to 1");
    return {std::move(atoms), std::move(weights)};
  }
};

/// V(eta) = -log sum_i p_i exp(-kappa_i eta^2 / 2).
inline double potential_eval(const MixtureSpec& spec, double eta) {
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> e(spec.atoms.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = spec.weights[i] > 0.0 ? std::log(spec.weights[i]) - 0.5 * spec.atoms[i] * eta * eta
                                 : -std::numeric_limits<double>::infinity();
    m = std::max(m, e[i]);
  }
  double s = 0.0;
  for (double x : e) s += std::exp(x - m);
  return -(m + std::log(s));
}

/// Conditional law of kappa on an edge with gradient eta: p_i exp(-kappa_i eta^2 / 2), normalised.
inline std::vector<double> tilted_weights(const MixtureSpec& spec, double eta) {
  std::vector<double> w(spec.atoms.size());
  const double v = potential_eval(spec, eta);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = spec.weights[i] > 0.0 ? std::exp(std::log(spec.weights[i]) - 0.5 * spec.atoms[i] * eta * eta + v) : 0.0;
  return w;
}

/// Draws an atom index from the tilted weights.
inline std::size_t sample_kappa(const MixtureSpec& spec, double eta, CounterRng& rng) {
  const auto w = tilted_weights(spec, eta);
  double u = rng.uniform(), acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return w.size() - 1;
}

// ---------------------------------------------------------------------------
// Gaussian fields
// ---------------------------------------------------------------------------

/// Gauge of a gradient field: pinned vertex, zero mean, or fixed boundary values.
struct FieldGauge {
  enum class Kind { pinned, zero_mean, dirichlet };
  Kind kind = Kind::zero_mean;
  Vertex vertex = 0;
  VertexMask boundary;
  ScalarField values;

  static FieldGauge pinned(Vertex v) { return {Kind::pinned, v, {}, {}}; }
  static FieldGauge zero_mean() { return {Kind::zero_mean, 0, {}, {}}; }
  static FieldGauge dirichlet(VertexMask boundary, ScalarField values) {
    return {Kind::dirichlet, 0, std::move(boundary), std::move(values)};
  }
};

struct GradientField {
  LatticePtr lattice;
  ScalarField height;
  FieldGauge gauge;
};

/// Exact sampler for the Gaussian field with precision -L_kappa on the
/// gauge-fixed subspace. The factorisation is done once; draws are cheap.
class GaussianFieldSampler {
public:
  GaussianFieldSampler(const Environment& kappa, FieldGauge gauge) : lattice_(kappa.lattice_ptr()), gauge_(std::move(gauge)) {
    const Lattice& lat = kappa.lattice();
    const std::size_t n = kappa.size();
    VertexMask free(n, 1);
    switch (gauge_.kind) {
      case FieldGauge::Kind::pinned:
        if (gauge_.vertex >= n) throw PreconditionError("pinned vertex outside lattice");
        free[gauge_.vertex] = 0;
        break;
      case FieldGauge::Kind::zero_mean:
        free[0] = 0;
        break;
      case FieldGauge::Kind::dirichlet:
        if (gauge_.boundary.size() != n || gauge_.values.size() != n) throw PreconditionError("boundary data size mismatch");
        for (Vertex v = 0; v < n; ++v) free[v] = !gauge_.boundary[v];
        break;
    }
    if (gauge_.kind != FieldGauge::Kind::dirichlet) {
      const auto comp = reachable_from(kappa, gauge_.kind == FieldGauge::Kind::pinned ? gauge_.vertex : 0, VertexMask(n, 0));
      for (Vertex v = 0; v < n; ++v)
        if (!comp[v]) throw ConsistencyError("singular operator: the conductance graph is disconnected");
    } else {
      const auto pieces = detail::pieces_of(kappa, free);
      for (auto a : pieces.anchored)
        if (!a) throw ConsistencyError("singular operator: a piece does not touch the boundary");
    }

    index_.assign(n, -1);
    for (Vertex v = 0; v < n; ++v)
      if (free[v]) {
        index_[v] = static_cast<std::int64_t>(free_.size());
        free_.push_back(v);
      }
    const auto m = static_cast<Eigen::Index>(free_.size());
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (Vertex v : free_) {
      const auto i = static_cast<Eigen::Index>(index_[v]);
      trip.emplace_back(i, i, kappa.pi(v));
      for (int s = 0; s < lat.slots(); ++s) {
        const double w = kappa.omega(v, s);
        if (w == 0.0) continue;
        const auto y = static_cast<Vertex>(lat.neighbor(v, s));
        if (index_[y] >= 0) {
          trip.emplace_back(i, static_cast<Eigen::Index>(index_[y]), -w);
        } else if (gauge_.kind == FieldGauge::Kind::dirichlet) {
          b[i] += w * gauge_.values[y];
        }
      }
    }
    Eigen::SparseMatrix<double> Q(m, m);
    Q.setFromTriplets(trip.begin(), trip.end());
    llt_.compute(Q);
    if (llt_.info() != Eigen::Success) throw ConsistencyError("singular operator: factorisation failed");
    mean_ = m > 0 ? Eigen::VectorXd(llt_.solve(b)) : Eigen::VectorXd();
  }

  /// Draw `index` of the stream family `seed`.
  GradientField draw(std::uint64_t seed, std::uint64_t index) const {
    CounterRng rng(seed, stream_id(StreamTag::field, index));
    const auto m = static_cast<Eigen::Index>(free_.size());
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
    Eigen::VectorXd y = llt_.matrixU().solve(z);
    Eigen::VectorXd x = llt_.permutationPinv() * y;
    GradientField f{lattice_, ScalarField(lattice_->size(), 0.0), gauge_};
    if (gauge_.kind == FieldGauge::Kind::dirichlet)
      for (Vertex v = 0; v < f.height.size(); ++v)
        if (gauge_.boundary[v]) f.height[v] = gauge_.values[v];
    for (std::size_t k = 0; k < free_.size(); ++k) f.height[free_[k]] = x[static_cast<Eigen::Index>(k)] + mean_[static_cast<Eigen::Index>(k)];
    if (gauge_.kind == FieldGauge::Kind::zero_mean) {
      double s = 0.0;
      for (double h : f.height) s += h;
      s /= static_cast<double>(f.height.size());
      for (double& h : f.height) h -= s;
    }
    return f;
  }

  /// Conditional mean (harmonic extension of the boundary data; zero otherwise).
  ScalarField mean() const {
    ScalarField out(lattice_->size(), 0.0);
    if (gauge_.kind == FieldGauge::Kind::dirichlet)
      for (Vertex v = 0; v < out.size(); ++v)
        if (gauge_.boundary[v]) out[v] = gauge_.values[v];
    for (std::size_t k = 0; k < free_.size(); ++k) out[free_[k]] = mean_[static_cast<Eigen::Index>(k)];
    return out;
  }

private:
  LatticePtr lattice_;
  FieldGauge gauge_;
  std::vector<std::int64_t> index_;
  std::vector<Vertex> free_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  Eigen::VectorXd mean_;
};

inline GradientField sample_gaussian_field(const Environment& kappa, std::uint64_t seed, const FieldGauge& gauge,
                                           std::uint64_t index = 0) {
  return GaussianFieldSampler(kappa, gauge).draw(seed, index);
}

// ---------------------------------------------------------------------------
// Extended Gibbs measure
// ---------------------------------------------------------------------------

struct GibbsState {
  Environment kappa;
  GradientField phi;
};

/// Gauge used for the phi step: boxes keep the current outer-face heights,
/// tori use the zero-mean gauge.
inline FieldGauge gibbs_gauge(const GibbsState& s) {
  const Lattice& lat = s.kappa.lattice();
  if (lat.periodic()) return FieldGauge::zero_mean();
  VertexMask b(lat.size(), 0);
  for (Vertex v = 0; v < lat.size(); ++v) b[v] = lat.on_outer_face(v);
  return FieldGauge::dirichlet(std::move(b), s.phi.height);
}

/// kappa step: every edge independently from the tilted atom weights.
inline void gibbs_kappa_step(GibbsState& s, const MixtureSpec& spec, std::uint64_t seed, std::uint64_t sweep) {
  CounterRng rng(seed, stream_id(StreamTag::gibbs, sweep));
  const Lattice& lat = s.kappa.lattice();
  lat.for_each_edge([&](Vertex v, int dir) {
    const auto y = static_cast<Vertex>(lat.neighbor(v, Lattice::slot_of(dir, 1)));
    const double eta = s.phi.height[y] - s.phi.height[v];
    s.kappa.set_forward(v, dir, spec.atoms[sample_kappa(spec, eta, rng)]);
  });
}

inline void gibbs_phi_step(GibbsState& s, std::uint64_t seed, std::uint64_t sweep) {
  s.phi = sample_gaussian_field(s.kappa, seed, gibbs_gauge(s), sweep);
}

/// One alternating sweep: all kappa, then phi.
inline void gibbs_sweep(GibbsState& s, const MixtureSpec& spec, std::uint64_t seed, std::uint64_t sweep) {
  gibbs_kappa_step(s, spec, seed, sweep);
  gibbs_phi_step(s, seed, sweep);
}

// ---------------------------------------------------------------------------
// Scaling functionals
// ---------------------------------------------------------------------------

/// Test function on R^d supported in the sup-norm ball of radius `support`.
struct TestFunction {
  std::function<double(const std::vector<double>&)> f;
  double support = 0.0;
};

/// Derivative in direction `dir` of the Gaussian exp(-|x|^2 / (2 s^2)), truncated at `cut` s.
inline TestFunction gaussian_derivative(int dir, double s, double cut = 8.0) {
  return {[dir, s](const std::vector<double>& x) {
            double r2 = 0.0;
            for (double c : x) r2 += c * c;
            return -x[static_cast<std::size_t>(dir)] / (s * s) * std::exp(-r2 / (2 * s * s));
          },
          cut * s};
}

namespace detail {

/// int_{cell z} f(eps x) dx for every cell z (cells [z - c, z - c + 1)^d with
/// c the lattice origin), by tensor Gauss-Legendre quadrature; zero on cells
/// outside the support.
inline ScalarField cell_integrals(const Lattice& lat, const TestFunction& tf, double eps) {
  if (!(eps > 0.0)) throw ParameterError("eps", "must be positive");
  const int d = lat.dim();
  const auto c = lat.center();
  const double reach = tf.support / eps;
  for (int i = 0; i < d; ++i)
    if (reach > static_cast<double>(c[static_cast<std::size_t>(i)]) ||
        reach > static_cast<double>(lat.side(i) - c[static_cast<std::size_t>(i)]))
      throw GeometryError("test function support exceeds the domain");

  using Rule = boost::math::quadrature::gauss<double, 5>;
  std::vector<double> nodes, wts;
  for (std::size_t k = 0; k < Rule::abscissa().size(); ++k) {
    const double a = Rule::abscissa()[k], w = Rule::weights()[k];
    nodes.push_back(0.5 + 0.5 * a);
    wts.push_back(0.5 * w);
    if (a != 0.0) {
      nodes.push_back(0.5 - 0.5 * a);
      wts.push_back(0.5 * w);
    }
  }
  const std::size_t q = nodes.size();
  std::size_t q_total = 1;
  for (int i = 0; i < d; ++i) q_total *= q;

  ScalarField out(lat.size(), 0.0);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (Vertex v = 0; v < lat.size(); ++v) {
    bool near = true;
    for (int i = 0; i < d; ++i) {
      const double z = static_cast<double>(lat.coord(v, i) - c[static_cast<std::size_t>(i)]);
      if (z + 1.0 < -reach || z > reach) near = false;
    }
    if (!near) continue;
    double acc = 0.0;
    for (std::size_t k = 0; k < q_total; ++k) {
      std::size_t r = k;
      double weight = 1.0;
      for (int i = 0; i < d; ++i) {
        const std::size_t j = r % q;
        r /= q;
        x[static_cast<std::size_t>(i)] = eps * (static_cast<double>(lat.coord(v, i) - c[static_cast<std::size_t>(i)]) + nodes[j]);
        weight *= wts[j];
      }
      acc += weight * tf.f(x);
    }
    out[v] = acc;
  }
  return out;
}

}  // namespace detail

/// Cell weights w_z = eps^{1+d/2} int_{cell z} f(eps x) dx, by default minus
/// their average so that sum_z w_z = 0.
inline ScalarField phi_epsilon_weights(const Lattice& lat, const TestFunction& tf, double eps, bool zero_sum = true) {
  ScalarField w = detail::cell_integrals(lat, tf, eps);
  const double scale = std::pow(eps, 1.0 + 0.5 * lat.dim());
  double total = 0.0;
  for (double& v : w) {
    v *= scale;
    total += v;
  }
  if (zero_sum) {
    const double avg = total / static_cast<double>(lat.size());
    for (double& v : w) v -= avg;
  }
  return w;
}

inline double phi_epsilon(const GradientField& field, const ScalarField& weights) {
  double s = 0.0;
  for (std::size_t v = 0; v < weights.size(); ++v) s += field.height[v] * weights[v];
  return s;
}

inline double phi_epsilon(const GradientField& field, const TestFunction& tf, double eps) {
  return phi_epsilon(field, phi_epsilon_weights(*field.lattice, tf, eps));
}

/// Exact Var(phi_eps(f) | kappa) = w . (-L_kappa)^{-1} w for zero-sum weights.
inline double phi_epsilon_variance(const Environment& kappa, const ScalarField& weights, const SolverOptions& opt = {},
                                   PoissonGauge gauge = PoissonGauge::zero_mean) {
  const auto u = solve_poisson(kappa, weights, 0, opt, gauge);
  double s = 0.0;
  for (std::size_t v = 0; v < weights.size(); ++v) s -= weights[v] * u.f[v];
  return s;
}

/// sigma_f^2 = <f, (-div q grad)^{-1} f> on the periodic box [-L/2, L/2)^d
/// sampled with `grid` points per side, k = 0 excluded.
inline double gff_variance_target(const TestFunction& tf, const Eigen::MatrixXd& q, int grid, double box_length) {
  const int d = static_cast<int>(q.rows());
  if (q.cols() != d || d < 1) throw ParameterError("q", "must be square");
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().minCoeff() <= 0.0)
    throw ConsistencyError("diffusion matrix is singular");
  if (grid < 2 || !(box_length > 0.0)) throw ParameterError("grid", "needs at least 2 points and a positive box");
  const std::vector<int> dims(static_cast<std::size_t>(d), grid);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid);
  const double h = box_length / grid;
  std::vector<std::complex<double>> data(total);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t idx = 0; idx < total; ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = -0.5 * box_length + h * m[static_cast<std::size_t>(i)];
    data[idx] = tf.f(x);
  }
  fourier::transform(data, dims, -1);
  const auto k = fourier::wavenumbers(grid, box_length);
  double s = 0.0;
  Eigen::VectorXd kv(d);
  for (std::size_t idx = 1; idx < total; ++idx) {
    const auto m = fourier::unflatten(idx, dims);
    for (int i = 0; i < d; ++i) kv[i] = k[static_cast<std::size_t>(m[static_cast<std::size_t>(i)])];
    s += std::norm(data[idx]) / kv.dot(q * kv);
  }
  return s * std::pow(h, 2 * d) / std::pow(box_length, d);
}

}  // namespace rcm
