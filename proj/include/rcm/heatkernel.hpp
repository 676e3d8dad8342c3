#pragma once

#include <algorithm>
#include <bit>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Sparse one-step kernel: P(v, v) = stay[v], P(v, nbr(v, s)) = move[v * slots + s].
/// Absorbing and degenerate vertices hold their mass.
class TransitionKernel {
public:
  static TransitionKernel from(const Environment& env) {
    const Lattice& lat = env.lattice();
    TransitionKernel k;
    k.lattice_ = env.lattice_ptr();
    k.slots_ = lat.slots();
    k.pi_ = env.pi_vector();
    k.stay_.assign(env.size(), 1.0);
    k.nbr_.assign(env.size() * static_cast<std::size_t>(k.slots_), -1);
    k.move_.assign(k.nbr_.size(), 0.0);
    for (Vertex v = 0; v < env.size(); ++v) {
      for (int s = 0; s < k.slots_; ++s) k.nbr_[k.at(v, s)] = lat.neighbor(v, s);
      if (lat.is_absorbing(v) || env.pi(v) <= 0.0) continue;
      k.stay_[v] = 0.0;
      for (int s = 0; s < k.slots_; ++s) k.move_[k.at(v, s)] = env.omega(v, s) / env.pi(v);
    }
    return k;
  }

  const Lattice& lattice() const noexcept { return *lattice_; }
  std::size_t size() const noexcept { return stay_.size(); }
  double stay(Vertex v) const noexcept { return stay_[v]; }
  double move(Vertex v, int s) const noexcept { return move_[at(v, s)]; }
  double pi(Vertex v) const noexcept { return pi_[v]; }
  const std::vector<double>& pi_vector() const noexcept { return pi_; }
  double laziness() const noexcept { return gamma_; }

  /// One step of the forward equation: out = in P.
  void apply(const std::vector<double>& in, std::vector<double>& out) const {
    const std::size_t n = size();
    out.assign(n, 0.0);
    for (Vertex v = 0; v < n; ++v) {
      const double m = in[v];
      if (m == 0.0) continue;
      out[v] += stay_[v] * m;
      const std::size_t base = v * static_cast<std::size_t>(slots_);
      for (int s = 0; s < slots_; ++s) {
        const double p = move_[base + static_cast<std::size_t>(s)];
        if (p != 0.0) out[static_cast<std::size_t>(nbr_[base + static_cast<std::size_t>(s)])] += p * m;
      }
    }
  }

  /// Transition probability P(x, y) for a single step.
  double probability(Vertex x, Vertex y) const {
    double p = x == y ? stay_[x] : 0.0;
    for (int s = 0; s < slots_; ++s)
      if (nbr_[at(x, s)] == static_cast<std::int64_t>(y)) p += move_[at(x, s)];
    return p;
  }

  friend TransitionKernel lazify(const TransitionKernel& k, double gamma);

private:
  std::size_t at(Vertex v, int s) const noexcept { return v * static_cast<std::size_t>(slots_) + static_cast<std::size_t>(s); }

  LatticePtr lattice_;
  int slots_ = 0;
  std::vector<double> pi_, stay_, move_;
  std::vector<std::int64_t> nbr_;
  double gamma_ = 0.0;
};

/// P' = gamma Id + (1 - gamma) P; reversible with respect to the same pi.
inline TransitionKernel lazify(const TransitionKernel& k, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma", "must lie in [0, 1)");
  TransitionKernel out = k;
  for (double& s : out.stay_) s = gamma + (1.0 - gamma) * s;
  for (double& m : out.move_) m *= 1.0 - gamma;
  out.gamma_ = 1.0 - (1.0 - gamma) * (1.0 - k.gamma_);
  return out;
}

enum class KernelMethod { exact, monte_carlo };

struct KernelSnapshot {
  Vertex base = 0;
  std::size_t steps = 0;
  double time = 0.0;  // continuous-time snapshots only
  std::vector<double> prob;
  KernelMethod method = KernelMethod::exact;
  std::size_t samples = 0;

  double total() const {
    double s = 0.0;
    for (double p : prob) s += p;
    return s;
  }
};

namespace detail {

inline void check_base(const TransitionKernel& k, Vertex x0) {
  if (x0 >= k.size()) throw GeometryError("base vertex outside lattice");
  if (k.pi(x0) <= 0.0) throw DegenerateVertexError(x0);
}

}  // namespace detail

/// Exact n-step distribution P^n(x0, .) by repeated sparse application.
inline KernelSnapshot exact_kernel(const TransitionKernel& k, Vertex x0, std::size_t n) {
  detail::check_base(k, x0);
  std::vector<double> mu(k.size(), 0.0), next;
  mu[x0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    k.apply(mu, next);
    mu.swap(next);
  }
  return {x0, n, 0.0, std::move(mu), KernelMethod::exact, 0};
}

inline KernelSnapshot exact_kernel(const Environment& env, Vertex x0, std::size_t n) {
  return exact_kernel(TransitionKernel::from(env), x0, n);
}

/// Empirical n-step distribution from `samples` discrete walks.
inline KernelSnapshot monte_carlo_kernel(const Environment& env, Vertex x0, std::size_t n, std::size_t samples,
                                         std::uint64_t seed) {
  if (samples == 0) throw ParameterError("samples", "must be positive");
  KernelSnapshot snap{x0, n, 0.0, std::vector<double>(env.size(), 0.0), KernelMethod::monte_carlo, samples};
  for (std::size_t i = 0; i < samples; ++i) snap.prob[simulate_discrete(env, x0, n, seed, i).end()] += 1.0;
  for (double& p : snap.prob) p /= static_cast<double>(samples);
  return snap;
}

/// Diagonal values P^k(x0, x0) for k = 0..n_max.
inline std::vector<double> diagonal_series(const TransitionKernel& k, Vertex x0, std::size_t n_max) {
  detail::check_base(k, x0);
  std::vector<double> mu(k.size(), 0.0), next, out;
  mu[x0] = 1.0;
  out.push_back(1.0);
  for (std::size_t i = 0; i < n_max; ++i) {
    k.apply(mu, next);
    mu.swap(next);
    out.push_back(mu[x0]);
  }
  return out;
}

/// Even-step return probabilities P^{2n}(x0, x0), n = 1..n_max, with a log-log
/// fit over the tail half n in [n_max / 2, n_max].
struct ReturnSeries {
  std::vector<double> n;
  std::vector<double> p;
  stats::LinearFit tail_fit;

  stats::LinearFit fit(double n_lo, double n_hi) const {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < n.size(); ++k)
      if (n[k] >= n_lo && n[k] <= n_hi) {
        x.push_back(n[k]);
        y.push_back(p[k]);
      }
    return stats::loglog_fit(x, y);
  }
};

inline ReturnSeries return_probability_series(const Environment& env, Vertex x0, std::size_t n_max) {
  if (n_max < 2) throw ParameterError("n_max", "must be >= 2");
  const auto diag = diagonal_series(TransitionKernel::from(env), x0, 2 * n_max);
  ReturnSeries s;
  for (std::size_t n = 1; n <= n_max; ++n) {
    s.n.push_back(static_cast<double>(n));
    s.p.push_back(diag[2 * n]);
  }
  s.tail_fit = s.fit(static_cast<double>(n_max / 2), static_cast<double>(n_max));
  return s;
}

/// Cauchy-Schwarz chain for the diagonal:
/// P^{2n}(0,0) >= (pi(0)/pi*) sum_{|x|<=sqrt n} P^n(0,x)^2 >= (pi(0)/pi*) P^n(|X_n|<=sqrt n)^2 / |B|.
struct DiagonalChain {
  std::size_t n = 0;
  double diagonal = 0.0;
  double cs_sum = 0.0;
  double cs_bound = 0.0;
  double ball_mass = 0.0;
  std::size_t ball_size = 0;
  double pi_star = 0.0;
};

inline DiagonalChain diagonal_lower_bound(const Environment& env, Vertex x0, std::size_t n) {
  const auto k = TransitionKernel::from(env);
  const auto half = exact_kernel(k, x0, n);
  std::vector<double> mu = half.prob, next;
  for (std::size_t i = 0; i < n; ++i) {
    k.apply(mu, next);
    mu.swap(next);
  }
  DiagonalChain c;
  c.n = n;
  c.diagonal = mu[x0];
  const Lattice& lat = env.lattice();
  const double r2 = static_cast<double>(n);
  double sq = 0.0;
  for (Vertex x = 0; x < env.size(); ++x) {
    double d2 = 0.0;
    for (long v : lat.relative(x, x0)) d2 += static_cast<double>(v * v);
    if (d2 > r2) continue;
    ++c.ball_size;
    c.pi_star = std::max(c.pi_star, env.pi(x));
    c.ball_mass += half.prob[x];
    sq += half.prob[x] * half.prob[x];
  }
  const double ratio = env.pi(x0) / c.pi_star;
  c.cs_sum = ratio * sq;
  c.cs_bound = ratio * c.ball_mass * c.ball_mass / static_cast<double>(c.ball_size);
  return c;
}

// ---------------------------------------------------------------------------
// Continuous time
// ---------------------------------------------------------------------------

/// VSRW kernels at several times by uniformization at rate max pi; Poisson
/// tails beyond 1e-10 are dropped.
inline std::vector<KernelSnapshot> continuous_kernels(const Environment& env, Vertex x0, const std::vector<double>& times) {
  const auto k = TransitionKernel::from(env);
  detail::check_base(k, x0);
  double rate = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) rate = std::max(rate, env.pi(v));
  // Uniformized chain: K = I + L / rate.
  std::vector<double> stay(env.size(), 1.0);
  for (Vertex v = 0; v < env.size(); ++v)
    if (k.stay(v) == 0.0) stay[v] = 1.0 - env.pi(v) / rate;
  const Lattice& lat = env.lattice();
  auto step = [&](const std::vector<double>& in, std::vector<double>& out) {
    out.assign(env.size(), 0.0);
    for (Vertex v = 0; v < env.size(); ++v) {
      const double m = in[v];
      if (m == 0.0) continue;
      out[v] += stay[v] * m;
      if (k.stay(v) != 0.0) continue;
      for (int s = 0; s < lat.slots(); ++s) {
        const double w = env.omega(v, s);
        if (w != 0.0) out[static_cast<std::size_t>(lat.neighbor(v, s))] += w / rate * m;
      }
    }
  };
  std::vector<KernelSnapshot> out;
  std::size_t k_max = 0;
  std::vector<std::size_t> lo(times.size()), hi(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] >= 0.0)) throw ParameterError("times", "must be nonnegative");
    out.push_back({x0, 0, times[j], std::vector<double>(env.size(), 0.0), KernelMethod::exact, 0});
    if (times[j] == 0.0 || rate == 0.0) {
      lo[j] = hi[j] = 0;
    } else {
      boost::math::poisson_distribution<double> pd(rate * times[j]);
      lo[j] = static_cast<std::size_t>(boost::math::quantile(pd, 0.5e-10));
      hi[j] = static_cast<std::size_t>(boost::math::quantile(boost::math::complement(pd, 0.5e-10))) + 1;
    }
    k_max = std::max(k_max, hi[j]);
  }
  std::vector<double> mu(env.size(), 0.0), next;
  mu[x0] = 1.0;
  for (std::size_t kk = 0; kk <= k_max; ++kk) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (kk < lo[j] || kk > hi[j]) continue;
      const double w = (times[j] == 0.0 || rate == 0.0)
                           ? 1.0
                           : boost::math::pdf(boost::math::poisson_distribution<double>(rate * times[j]), static_cast<double>(kk));
      for (Vertex v = 0; v < env.size(); ++v) out[j].prob[v] += w * mu[v];
    }
    if (kk < k_max) {
      step(mu, next);
      mu.swap(next);
    }
  }
  return out;
}

/// Backward VSRW semigroup u(T) = e^{T L} u0 (u(T, x) = E^x u0(Y_T)) by
/// uniformization at rate max pi; absorbing and degenerate vertices keep
/// their value. Throws SolverError beyond `max_terms` kernel applications.
inline std::vector<double> vsrw_semigroup(const Environment& env, const std::vector<double>& u0, double T,
                                  std::size_t max_terms = 10000000) {
  const Lattice& lat = env.lattice();
  if (u0.size() != env.size()) throw PreconditionError("initial data size mismatch");
  if (!(T >= 0.0)) throw ParameterError("t", "must be nonnegative");
  double rate = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) rate = std::max(rate, env.pi(v));
  if (T == 0.0 || rate == 0.0) return u0;
  boost::math::poisson_distribution<double> pd(rate * T);
  const auto lo = static_cast<std::size_t>(boost::math::quantile(pd, 0.5e-10));
  const auto hi = static_cast<std::size_t>(boost::math::quantile(boost::math::complement(pd, 0.5e-10))) + 1;
  if (hi > max_terms)
    throw SolverError("uniformization budget exceeded", std::numeric_limits<double>::infinity(), hi);

  std::vector<std::int64_t> nbr(env.size() * static_cast<std::size_t>(lat.slots()));
  std::vector<double> w(nbr.size());
  std::vector<std::uint8_t> active(env.size());
  for (Vertex v = 0; v < env.size(); ++v) {
    active[v] = !lat.is_absorbing(v) && env.pi(v) > 0.0;
    for (int s = 0; s < lat.slots(); ++s) {
      const std::size_t i = v * static_cast<std::size_t>(lat.slots()) + static_cast<std::size_t>(s);
      nbr[i] = lat.neighbor(v, s);
      w[i] = env.omega(v, s) / rate;
    }
  }
  std::vector<double> u = u0, next(env.size()), out(env.size(), 0.0);
  double mass = 0.0;
  for (std::size_t k = 0; k <= hi; ++k) {
    if (k >= lo) {
      const double p = boost::math::pdf(pd, static_cast<double>(k));
      mass += p;
      for (Vertex v = 0; v < env.size(); ++v) out[v] += p * u[v];
    }
    if (k == hi) break;
    for (Vertex v = 0; v < env.size(); ++v) {
      double acc = u[v];
      if (active[v]) {
        const std::size_t base = v * static_cast<std::size_t>(lat.slots());
        for (int s = 0; s < lat.slots(); ++s) {
          const double ws = w[base + static_cast<std::size_t>(s)];
          if (ws != 0.0) acc += ws * (u[static_cast<std::size_t>(nbr[base + static_cast<std::size_t>(s)])] - u[v]);
        }
      }
      next[v] = acc;
    }
    u.swap(next);
  }
  for (double& v : out) v /= mass;
  return out;
}

inline KernelSnapshot continuous_kernel(const Environment& env, Vertex x0, double t) {
  return continuous_kernels(env, x0, {t}).front();
}

/// Suprema over |x - center| <= radius and the time grid of E|Y_t - x| / sqrt t
/// and t^{d/2} P(Y_t = x) for the VSRW.
struct DiffusiveBounds {
  double mean_displacement = 0.0;
  double on_diagonal = 0.0;
  std::size_t points = 0;
  KernelMethod method = KernelMethod::exact;
  std::size_t samples = 0;
};

inline DiffusiveBounds diffusive_bound_stats(const Environment& env, Vertex center, double radius,
                                             const std::vector<double>& times,
                                             KernelMethod method = KernelMethod::exact, std::size_t samples = 0,
                                             std::uint64_t seed = 0) {
  const Lattice& lat = env.lattice();
  const double half_d = 0.5 * static_cast<double>(lat.dim());
  if (method == KernelMethod::monte_carlo && samples == 0) throw ParameterError("samples", "must be positive");
  DiffusiveBounds out;
  out.method = method;
  out.samples = samples;
  auto dist = [&](Vertex a, Vertex b) {
    double s = 0.0;
    for (long v : lat.relative(a, b)) s += static_cast<double>(v * v);
    return std::sqrt(s);
  };
  const double t_max = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  for (Vertex x = 0; x < env.size(); ++x) {
    if (env.pi(x) <= 0.0 || dist(x, center) > radius) continue;
    ++out.points;
    std::vector<double> mean(times.size(), 0.0), diag(times.size(), 0.0);
    if (method == KernelMethod::exact) {
      const auto snaps = continuous_kernels(env, x, times);
      for (std::size_t j = 0; j < times.size(); ++j) {
        for (Vertex y = 0; y < env.size(); ++y)
          if (snaps[j].prob[y] != 0.0) mean[j] += snaps[j].prob[y] * dist(y, x);
        diag[j] = snaps[j].prob[x];
      }
    } else {
      for (std::size_t i = 0; i < samples; ++i) {
        const auto path = simulate_vsrw(env, x, t_max, seed, x * samples + i);
        for (std::size_t j = 0; j < times.size(); ++j) {
          const Vertex y = position_at(path, times[j]);
          mean[j] += dist(y, x);
          if (y == x) diag[j] += 1.0;
        }
      }
      for (std::size_t j = 0; j < times.size(); ++j) {
        mean[j] /= static_cast<double>(samples);
        diag[j] /= static_cast<double>(samples);
      }
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (times[j] <= 0.0) continue;
      out.mean_displacement = std::max(out.mean_displacement, mean[j] / std::sqrt(times[j]));
      out.on_diagonal = std::max(out.on_diagonal, std::pow(times[j], half_d) * diag[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trap experiment
// ---------------------------------------------------------------------------

/// Exact diagonal at the origin together with the product lower bound
/// path x trap entry x confinement on the core edge x trap exit x path back.
struct TrapRow {
  std::size_t n = 0;
  double measured = 0.0;
  double lower_bound = 0.0;
  double path_cost = 0.0;    // forward and backward access path
  double entry = 0.0;        // P(x, a)
  double confinement = 0.0;  // stay on {a, b} for 2n - 2l - 2 steps, ending at a
  double exit = 0.0;         // P(a, x)
  double control = 0.0;      // unit environment on the same lattice
};

inline std::vector<TrapRow> trap_decay_experiment(const Environment& env, const TrapGeometry& g,
                                                  const std::vector<std::size_t>& ns, bool with_control = true) {
  if (ns.empty()) return {};
  const auto k = TransitionKernel::from(env);
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  const auto diag = diagonal_series(k, g.origin, 2 * n_max);
  std::vector<double> control;
  if (with_control) {
    const auto unit = build_environment(EnvironmentLaw::constant(1.0), env.lattice_ptr(), 0);
    control = diagonal_series(TransitionKernel::from(unit), g.origin, 2 * n_max);
  }
  double path = 1.0;
  for (std::size_t i = 0; i + 1 < g.path.size(); ++i)
    path *= k.probability(g.path[i], g.path[i + 1]) * k.probability(g.path[i + 1], g.path[i]);
  const double entry = k.probability(g.access, g.core_a);
  const double exit = k.probability(g.core_a, g.access);
  const double round_trip = k.probability(g.core_a, g.core_b) * k.probability(g.core_b, g.core_a);
  const auto ell = g.path.size() - 1;

  std::vector<TrapRow> rows;
  for (std::size_t n : ns) {
    TrapRow r;
    r.n = n;
    r.measured = diag[2 * n];
    r.path_cost = path;
    r.entry = entry;
    r.exit = exit;
    if (2 * n >= 2 * ell + 2) {
      const auto m = 2 * n - 2 * ell - 2;
      r.confinement = std::pow(round_trip, static_cast<double>(m / 2));
      r.lower_bound = path * entry * r.confinement * exit;
    }
    if (with_control) r.control = control[2 * n];
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Isoperimetry and the Morris-Peres bound
// ---------------------------------------------------------------------------

/// phi(r) = inf { Q(A, A^c) / pi(A) : pi(A) <= r }, stored as a step function:
/// phi(r) = phi[k] for volumes[k] <= r < volumes[k + 1], +inf below volumes[0].
struct IsoperimetricProfile {
  std::vector<double> volumes;
  std::vector<double> phi;
  std::size_t cutoff = 18;
  double coverage = std::numeric_limits<double>::infinity();  // largest r for which phi is known
  bool exact = true;                                           // false: values are upper bounds only

  double operator()(double r) const {
    auto it = std::upper_bound(volumes.begin(), volumes.end(), r);
    if (it == volumes.begin()) return std::numeric_limits<double>::infinity();
    return phi[static_cast<std::size_t>(it - volumes.begin()) - 1];
  }
};

struct IsoperimetryOptions {
  std::size_t cutoff = 18;
  bool allow_fallback = false;
  bool connected_only = true;
  double r_max = std::numeric_limits<double>::infinity();
};

namespace detail {

inline IsoperimetricProfile profile_from(std::vector<std::pair<double, double>> sets, const IsoperimetryOptions& opt) {
  std::sort(sets.begin(), sets.end());
  IsoperimetricProfile prof;
  prof.cutoff = opt.cutoff;
  prof.coverage = opt.r_max;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [vol, ratio] : sets) {
    best = std::min(best, ratio);
    if (!prof.volumes.empty() && prof.volumes.back() == vol) {
      prof.phi.back() = best;
    } else {
      prof.volumes.push_back(vol);
      prof.phi.push_back(best);
    }
  }
  return prof;
}

}  // namespace detail

/// Isoperimetric profile of the conductance graph on the vertices with pi > 0.
/// Exhaustive over (connected) subsets up to `cutoff` vertices; beyond that a
/// greedy growth from every vertex gives upper bounds, flagged as inexact.
inline IsoperimetricProfile isoperimetric_profile(const Environment& env, const IsoperimetryOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  std::vector<Vertex> verts;
  std::vector<std::int64_t> local(env.size(), -1);
  for (Vertex v = 0; v < env.size(); ++v)
    if (env.pi(v) > 0.0) {
      local[v] = static_cast<std::int64_t>(verts.size());
      verts.push_back(v);
    }
  const std::size_t n = verts.size();
  if (n == 0) throw PreconditionError("graph has no vertex with pi > 0");

  // Local adjacency with weights.
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < lat.slots(); ++s) {
      const double w = env.omega(verts[i], s);
      if (w > 0.0) adj[i].push_back({static_cast<std::size_t>(local[static_cast<std::size_t>(lat.neighbor(verts[i], s))]), w});
    }

  std::vector<std::pair<double, double>> sets;
  if (n <= opt.cutoff && n < 63) {
    std::vector<std::uint64_t> nb(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (auto [j, w] : adj[i]) nb[i] |= std::uint64_t{1} << j;
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t mask = 1; mask <= full; ++mask) {
      if (opt.connected_only) {
        std::uint64_t seen = mask & (~mask + 1), frontier = seen;
        while (frontier) {
          std::uint64_t grow = 0;
          for (std::uint64_t f = frontier; f; f &= f - 1) grow |= nb[static_cast<std::size_t>(std::countr_zero(f))];
          grow &= mask & ~seen;
          seen |= grow;
          frontier = grow;
        }
        if (seen != mask) continue;
      }
      double vol = 0.0, q = 0.0;
      for (std::uint64_t f = mask; f; f &= f - 1) {
        const auto i = static_cast<std::size_t>(std::countr_zero(f));
        vol += env.pi(verts[i]);
        for (auto [j, w] : adj[i])
          if (!((mask >> j) & 1)) q += w;
      }
      if (vol <= opt.r_max) sets.emplace_back(vol, q / vol);
    }
    return detail::profile_from(std::move(sets), opt);
  }
  if (!opt.allow_fallback)
    throw PreconditionError("graph has " + std::to_string(n) + " vertices, above the enumeration cutoff " +
                            std::to_string(opt.cutoff));
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::uint8_t> in(n, 0);
    in[start] = 1;
    double vol = env.pi(verts[start]), q = vol;
    sets.emplace_back(vol, q / vol);
    for (std::size_t size = 1; size < n; ++size) {
      std::size_t best = n;
      double best_q = 0.0, best_vol = 0.0, best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (in[i]) continue;
        bool touches = false;
        double inside = 0.0, total = 0.0;
        for (auto [j, w] : adj[i]) {
          total += w;
          if (in[j]) {
            touches = true;
            inside += w;
          }
        }
        if (!touches) continue;
        const double nq = q + total - 2.0 * inside, nv = vol + env.pi(verts[i]);
        if (nq / nv < best_ratio) {
          best = i;
          best_ratio = nq / nv;
          best_q = nq;
          best_vol = nv;
        }
      }
      if (best == n || best_vol > opt.r_max) break;
      in[best] = 1;
      q = best_q;
      vol = best_vol;
      sets.emplace_back(vol, q / vol);
    }
  }
  auto prof = detail::profile_from(std::move(sets), opt);
  prof.exact = false;
  return prof;
}

/// Profile of the lazified chain: Q scales by (1 - gamma), pi is unchanged.
inline IsoperimetricProfile lazify(IsoperimetricProfile prof, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma", "must lie in [0, 1)");
  for (double& p : prof.phi) p *= 1.0 - gamma;
  return prof;
}

/// Integral of dr / (r phi(r)^2) over [a, b], exact for the step profile.
inline double morris_peres_integral(const IsoperimetricProfile& prof, double a, double b) {
  if (!(b > a)) return 0.0;
  if (b > prof.coverage) throw PreconditionError("profile does not cover the integration range");
  double total = 0.0;
  for (std::size_t k = 0; k < prof.volumes.size(); ++k) {
    const double lo = std::max(a, prof.volumes[k]);
    const double hi = std::min(b, k + 1 < prof.volumes.size() ? prof.volumes[k + 1] : b);
    if (!(hi > lo)) continue;
    if (prof.phi[k] <= 0.0) return std::numeric_limits<double>::infinity();
    total += std::log(hi / lo) / (prof.phi[k] * prof.phi[k]);
  }
  return total;
}

namespace detail {

inline double morris_peres_steps(double integral, double gamma) {
  if (!(gamma > 0.0 && gamma < 0.5)) throw ParameterError("gamma", "must lie in (0, 1/2)");
  if (std::isinf(integral)) return integral;
  const double c = (1.0 - gamma) / gamma;
  return std::ceil(1.0 + c * c * integral);
}

}  // namespace detail

/// Smallest integer n with n >= 1 + ((1-gamma)/gamma)^2 int_{4 pi_min}^{4/eps} dr / (r phi(r)^2);
/// +inf when the profile vanishes inside the range. `prof` is the profile of
/// the (lazy) chain being bounded.
inline double morris_peres_threshold(const IsoperimetricProfile& prof, double gamma, double eps, double pi_min) {
  if (!(eps > 0.0)) throw ParameterError("eps", "must be positive");
  return detail::morris_peres_steps(morris_peres_integral(prof, 4.0 * pi_min, 4.0 / eps), gamma);
}

/// Same threshold for a profile given as a function, by adaptive quadrature.
inline double morris_peres_threshold(const std::function<double(double)>& phi, double gamma, double eps,
                                     double pi_min) {
  if (!(eps > 0.0)) throw ParameterError("eps", "must be positive");
  const double a = 4.0 * pi_min, b = 4.0 / eps;
  double integral = 0.0;
  if (b > a) {
    // Substitute r = e^u: dr / r = du.
    auto f = [&](double u) {
      const double p = phi(std::exp(u));
      return 1.0 / (p * p);
    };
    integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, std::log(a), std::log(b), 15, 1e-13);
  }
  return detail::morris_peres_steps(integral, gamma);
}

/// max_{x, y} P^n(x, y) / pi(y) over vertices with pi > 0.
inline double max_kernel_ratio(const TransitionKernel& k, std::size_t n) {
  double worst = 0.0;
  for (Vertex x = 0; x < k.size(); ++x) {
    if (k.pi(x) <= 0.0) continue;
    const auto snap = exact_kernel(k, x, n);
    for (Vertex y = 0; y < k.size(); ++y)
      if (k.pi(y) > 0.0) worst = std::max(worst, snap.prob[y] / k.pi(y));
  }
  return worst;
}

}  // namespace rcm
