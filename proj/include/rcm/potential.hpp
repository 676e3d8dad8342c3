#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "rcm/environment.hpp"

namespace rcm {

using ScalarField = std::vector<double>;
using VertexMask = std::vector<std::uint8_t>;

enum class SolverMethod { relaxation, conjugate_gradient };

struct SolverOptions {
  SolverMethod method = SolverMethod::conjugate_gradient;
  double tol = 1e-10;
  std::size_t max_iterations = 0;  // 0: 1e6 sweeps (relaxation), 1e4 iterations (CG)

  std::size_t cap() const noexcept {
    if (max_iterations) return max_iterations;
    return method == SolverMethod::relaxation ? 1'000'000 : 10'000;
  }
};

struct SolveResult {
  ScalarField f;
  double residual = 0.0;
  std::size_t iterations = 0;
};

/// Dirichlet problem L f = 0 on `interior`, f = boundary off `interior`.
struct DirichletProblem {
  const Environment* env = nullptr;
  VertexMask interior;
  ScalarField boundary;
  /// Interior pieces with no positive edge to the boundary are set to zero
  /// instead of raising (hitting-probability convention).
  bool zero_on_isolated = false;
};

/// (L f)(x) = sum_y omega_xy (f(y) - f(x)).
inline double laplacian_at(const Environment& env, const ScalarField& f, Vertex x) {
  const Lattice& lat = env.lattice();
  double acc = 0.0;
  for (int k = 0; k < lat.slots(); ++k) {
    const double w = env.omega(x, k);
    if (w > 0.0) acc += w * (f[static_cast<Vertex>(lat.neighbor(x, k))] - f[x]);
  }
  return acc;
}

inline ScalarField laplacian(const Environment& env, const ScalarField& f) {
  ScalarField out(env.size());
  for (Vertex x = 0; x < env.size(); ++x) out[x] = laplacian_at(env, f, x);
  return out;
}

/// Sum over edges meeting A of omega (f(y) - f(x))^2, each edge counted once.
inline double dirichlet_energy(const Environment& env, const ScalarField& f, const VertexMask& A) {
  const Lattice& lat = env.lattice();
  double e = 0.0;
  lat.for_each_edge([&](Vertex v, int dir) {
    const auto y = static_cast<Vertex>(lat.neighbor(v, Lattice::slot_of(dir, 1)));
    if (!A[v] && !A[y]) return;
    const double d = f[y] - f[v];
    e += env.forward(v, dir) * d * d;
  });
  return e;
}

/// Energy over every edge of the domain.
inline double dirichlet_energy(const Environment& env, const ScalarField& f) {
  return dirichlet_energy(env, f, VertexMask(env.size(), 1));
}

/// One Gauss-Seidel pass in vertex order: f(x) <- (P f)(x) for x in A.
inline void relaxation_sweep(const Environment& env, ScalarField& f, const VertexMask& A) {
  const Lattice& lat = env.lattice();
  for (Vertex x = 0; x < env.size(); ++x) {
    if (!A[x]) continue;
    const double pi = env.pi(x);
    if (!(pi > 0.0)) throw DegenerateVertexError(x);
    double acc = 0.0;
    for (int k = 0; k < lat.slots(); ++k) {
      const double w = env.omega(x, k);
      if (w > 0.0) acc += w * f[static_cast<Vertex>(lat.neighbor(x, k))];
    }
    f[x] = acc / pi;
  }
}

namespace detail {

/// Positive-conductance components of the subgraph induced on `A`; returns a
/// piece id per vertex of A (-1 elsewhere) and whether each piece has a
/// positive edge leaving A.
struct Pieces {
  std::vector<std::int64_t> id;
  std::vector<std::uint8_t> anchored;
};

inline Pieces pieces_of(const Environment& env, const VertexMask& A) {
  const Lattice& lat = env.lattice();
  Pieces p;
  p.id.assign(env.size(), -1);
  std::vector<Vertex> stack;
  for (Vertex s = 0; s < env.size(); ++s) {
    if (!A[s] || p.id[s] != -1) continue;
    const auto pid = static_cast<std::int64_t>(p.anchored.size());
    p.anchored.push_back(0);
    p.id[s] = pid;
    stack.push_back(s);
    while (!stack.empty()) {
      const Vertex x = stack.back();
      stack.pop_back();
      for (int k = 0; k < lat.slots(); ++k) {
        if (!(env.omega(x, k) > 0.0)) continue;
        const auto y = static_cast<Vertex>(lat.neighbor(x, k));
        if (!A[y]) {
          p.anchored[static_cast<std::size_t>(pid)] = 1;
        } else if (p.id[y] == -1) {
          p.id[y] = pid;
          stack.push_back(y);
        }
      }
    }
  }
  return p;
}

/// Solves L f = s on the vertices of A with f fixed off A. `f` carries the
/// boundary values on entry and the initial guess on A. A may be singular
/// (no boundary contact) only when s sums to zero on each such piece.
inline SolveResult solve_on(const Environment& env, const VertexMask& A, ScalarField f, const ScalarField& s,
                            const SolverOptions& opt) {
  const Lattice& lat = env.lattice();
  const std::size_t n = env.size();
  std::vector<Vertex> unknowns;
  std::vector<std::int64_t> pos(n, -1);
  for (Vertex x = 0; x < n; ++x)
    if (A[x]) {
      if (!(env.pi(x) > 0.0)) throw DegenerateVertexError(x);
      pos[x] = static_cast<std::int64_t>(unknowns.size());
      unknowns.push_back(x);
    }
  double scale = 1.0;
  for (Vertex x = 0; x < n; ++x) {
    if (!A[x]) scale = std::max(scale, std::abs(f[x]));
    if (!s.empty()) scale = std::max(scale, std::abs(s[x]));
  }
  const double threshold = opt.tol * scale;
  auto rhs = [&](Vertex x) { return s.empty() ? 0.0 : s[x]; };
  auto true_residual = [&] {
    double r = 0.0;
    for (Vertex x : unknowns) r = std::max(r, std::abs(laplacian_at(env, f, x) - rhs(x)));
    return r;
  };

  SolveResult res;
  const std::size_t cap = opt.cap();
  if (unknowns.empty()) {
    res.f = std::move(f);
    return res;
  }

  if (opt.method == SolverMethod::relaxation) {
    for (std::size_t it = 0;; ++it) {
      const double r = true_residual();
      if (r <= threshold) {
        res.residual = r;
        res.iterations = it;
        break;
      }
      if (it >= cap) throw SolverError("relaxation did not converge", r, it);
      for (Vertex x : unknowns) {
        double acc = -rhs(x);
        for (int k = 0; k < lat.slots(); ++k) {
          const double w = env.omega(x, k);
          if (w > 0.0) acc += w * f[static_cast<Vertex>(lat.neighbor(x, k))];
        }
        f[x] = acc / env.pi(x);
      }
    }
    res.f = std::move(f);
    return res;
  }

  // Jacobi-preconditioned CG on (-L)_AA u = b, b = -s + sum_{y not in A} omega g(y).
  const std::size_t m = unknowns.size();
  std::vector<double> u(m), r(m), z(m), p(m), q(m);
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < m; ++i) {
      const Vertex x = unknowns[i];
      double acc = env.pi(x) * v[i];
      for (int k = 0; k < lat.slots(); ++k) {
        const double w = env.omega(x, k);
        if (!(w > 0.0)) continue;
        const auto j = pos[static_cast<Vertex>(lat.neighbor(x, k))];
        if (j >= 0) acc -= w * v[static_cast<std::size_t>(j)];
      }
      out[i] = acc;
    }
  };
  auto max_abs = [](const std::vector<double>& v) {
    double a = 0.0;
    for (double x : v) a = std::max(a, std::abs(x));
    return a;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };
  for (std::size_t i = 0; i < m; ++i) {
    const Vertex x = unknowns[i];
    u[i] = f[x];
    double b = -rhs(x);
    for (int k = 0; k < lat.slots(); ++k) {
      const double w = env.omega(x, k);
      if (!(w > 0.0)) continue;
      const auto y = static_cast<Vertex>(lat.neighbor(x, k));
      if (!A[y]) b += w * f[y];
    }
    r[i] = b;
  }
  apply(u, q);
  for (std::size_t i = 0; i < m; ++i) r[i] -= q[i];
  auto precondition = [&] {
    for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / env.pi(unknowns[i]);
  };
  precondition();
  p = z;
  double rz = dot(r, z);
  std::size_t it = 0;
  double rmax = max_abs(r);
  while (true) {
    if (rmax <= threshold) {
      // Confirm against the true residual; rebuild r if recursion drifted.
      for (std::size_t i = 0; i < m; ++i) f[unknowns[i]] = u[i];
      const double tr = true_residual();
      if (tr <= threshold) {
        res.residual = tr;
        break;
      }
      for (std::size_t i = 0; i < m; ++i) r[i] = laplacian_at(env, f, unknowns[i]) - rhs(unknowns[i]);
      precondition();
      p = z;
      rz = dot(r, z);
      rmax = max_abs(r);
      if (rmax <= threshold) {
        res.residual = rmax;
        break;
      }
    }
    if (it >= cap) {
      for (std::size_t i = 0; i < m; ++i) f[unknowns[i]] = u[i];
      throw SolverError("conjugate gradient did not converge", true_residual(), it);
    }
    apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      for (std::size_t i = 0; i < m; ++i) f[unknowns[i]] = u[i];
      const double tr = true_residual();
      if (tr <= threshold) {
        res.residual = tr;
        break;
      }
      throw SolverError("conjugate gradient breakdown", tr, it);
    }
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < m; ++i) {
      u[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    precondition();
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    rmax = max_abs(r);
    ++it;
  }
  for (std::size_t i = 0; i < m; ++i) f[unknowns[i]] = u[i];
  res.iterations = it;
  res.f = std::move(f);
  return res;
}

}  // namespace detail

/// Solves the Dirichlet problem. The residual satisfies
/// max_A |L f| <= tol * max(1, max |g|).
inline SolveResult solve_dirichlet(const DirichletProblem& prob, const SolverOptions& opt = {}) {
  if (!prob.env) throw PreconditionError("Dirichlet problem without environment");
  const Environment& env = *prob.env;
  if (prob.interior.size() != env.size() || prob.boundary.size() != env.size())
    throw PreconditionError("Dirichlet problem size mismatch");
  VertexMask A = prob.interior;
  ScalarField f = prob.boundary;
  const auto pieces = detail::pieces_of(env, A);
  for (Vertex x = 0; x < env.size(); ++x) {
    if (!A[x]) continue;
    const bool degenerate = !(env.pi(x) > 0.0);
    const bool free_piece = !pieces.anchored[static_cast<std::size_t>(pieces.id[x])];
    if (degenerate || free_piece) {
      if (!prob.zero_on_isolated) {
        if (degenerate) throw DegenerateVertexError(x);
        throw PreconditionError("interior piece without boundary contact (ill-posed Dirichlet problem)");
      }
      A[x] = 0;
      f[x] = 0.0;
    }
  }
  // Start from the mean boundary value; it is exact for constant data.
  double gsum = 0.0;
  std::size_t gcount = 0;
  for (Vertex x = 0; x < env.size(); ++x)
    if (!prob.interior[x]) {
      gsum += prob.boundary[x];
      ++gcount;
    }
  const double start = gcount ? gsum / static_cast<double>(gcount) : 0.0;
  for (Vertex x = 0; x < env.size(); ++x)
    if (A[x]) f[x] = start;
  return detail::solve_on(env, A, std::move(f), {}, opt);
}

/// Distinguished value for disconnected source and sink.
inline constexpr double kInfiniteResistance = std::numeric_limits<double>::infinity();

/// Vertices reachable from `source` along positive edges without entering `stop`.
inline VertexMask reachable_from(const Environment& env, Vertex source, const VertexMask& stop) {
  const Lattice& lat = env.lattice();
  VertexMask seen(env.size(), 0);
  std::vector<Vertex> stack{source};
  seen[source] = 1;
  while (!stack.empty()) {
    const Vertex x = stack.back();
    stack.pop_back();
    if (stop[x] && x != source) continue;
    for (int k = 0; k < lat.slots(); ++k) {
      if (!(env.omega(x, k) > 0.0)) continue;
      const auto y = static_cast<Vertex>(lat.neighbor(x, k));
      if (!seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
    }
  }
  return seen;
}

struct ResistanceResult {
  double value = kInfiniteResistance;
  double residual = 0.0;
  std::size_t iterations = 0;
  ScalarField potential;  // unit potential at the source, zero on the sink
};

/// Point-to-set effective resistance: 1 / E(f*) with f* harmonic off the
/// terminals, f*(source) = 1 and f* = 0 on the sink.
inline ResistanceResult effective_resistance_to_set(const Environment& env, Vertex source, const VertexMask& sink,
                                                    const SolverOptions& opt = {}) {
  if (source >= env.size() || sink.size() != env.size()) throw PreconditionError("vertex outside domain");
  if (sink[source]) throw PreconditionError("source lies in the sink");
  ResistanceResult out;
  const VertexMask reach = reachable_from(env, source, sink);
  bool connected = false;
  for (Vertex x = 0; x < env.size(); ++x)
    if (reach[x] && sink[x]) connected = true;
  if (!connected) {
    out.potential.assign(env.size(), 0.0);
    out.potential[source] = 1.0;
    return out;
  }
  VertexMask A(env.size(), 0);
  ScalarField f(env.size(), 0.0);
  for (Vertex x = 0; x < env.size(); ++x)
    if (reach[x] && !sink[x] && x != source) {
      A[x] = 1;
      f[x] = 0.5;
    }
  f[source] = 1.0;
  auto res = detail::solve_on(env, A, std::move(f), {}, opt);
  out.value = 1.0 / dirichlet_energy(env, res.f);
  out.residual = res.residual;
  out.iterations = res.iterations;
  out.potential = std::move(res.f);
  return out;
}

inline ResistanceResult effective_resistance(const Environment& env, Vertex source, Vertex sink,
                                             const SolverOptions& opt = {}) {
  if (sink >= env.size()) throw PreconditionError("vertex outside domain");
  VertexMask s(env.size(), 0);
  s[sink] = 1;
  return effective_resistance_to_set(env, source, s, opt);
}

/// Linf distance between x and `center` (minimal image on a torus).
inline long linf_distance(const Lattice& lat, Vertex x, Vertex center) {
  long r = 0;
  for (long c : lat.relative(x, center)) r = std::max(r, std::abs(c));
  return r;
}

/// Lambda = { |y - center|_inf < N }; the complement inside the lattice is the sink.
inline VertexMask box_complement(const Lattice& lat, Vertex center, long N) {
  VertexMask m(lat.size(), 0);
  for (Vertex y = 0; y < lat.size(); ++y) m[y] = linf_distance(lat, y, center) >= N ? 1 : 0;
  return m;
}

/// R(x, Lambda^c)^{-1} with Lambda = { |y - center|_inf < N }.
inline ResistanceResult escape_conductance(const Environment& env, Vertex x, Vertex center, long N,
                                           const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  if (x >= env.size() || center >= env.size()) throw PreconditionError("vertex outside domain");
  if (N < 1 || linf_distance(lat, x, center) >= N) throw PreconditionError("x must be interior to the box");
  for (int i = 0; i < lat.dim(); ++i) {
    const long c = lat.coord(center, i);
    const bool fits = lat.periodic() ? lat.side(i) > 2 * N : (c - N >= 0 && c + N < lat.side(i));
    if (!fits) throw GeometryError("box complement not contained in the lattice");
  }
  auto r = effective_resistance_to_set(env, x, box_complement(lat, center, N), opt);
  r.value = std::isinf(r.value) ? 0.0 : 1.0 / r.value;
  return r;
}

/// Plate problem on a slab: coordinate `height_dir` has side 2N+1, heights
/// h = coord - N; f = +1 at h = N, -1 at h = -N, harmonic in between.
/// Vertices that cannot reach a plate get 0.
inline SolveResult plate_potential(const Environment& env, long N, int height_dir = -1,
                                   const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  if (height_dir < 0) height_dir = lat.dim() - 1;
  if (height_dir >= lat.dim() || lat.side(height_dir) != 2 * N + 1)
    throw GeometryError("slab height side must be 2N+1");
  DirichletProblem prob{&env, VertexMask(env.size(), 1), ScalarField(env.size(), 0.0), true};
  for (Vertex x = 0; x < env.size(); ++x) {
    const long h = lat.coord(x, height_dir) - N;
    if (h == N || h == -N) {
      prob.interior[x] = 0;
      prob.boundary[x] = h > 0 ? 1.0 : -1.0;
    }
  }
  return solve_dirichlet(prob, opt);
}

/// Box conductance on a box of side 2N+1 (the lattice): f = -x_1 on the faces
/// x_1 = +-N, free elsewhere; returns the minimal Dirichlet sum.
struct BoxConductance {
  double value = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
};

inline BoxConductance box_conductance(const Environment& env, long N, const SolverOptions& opt = {}) {
  const Lattice& lat = env.lattice();
  if (lat.periodic()) throw GeometryError("box conductance needs a non-periodic box");
  for (int s : lat.sides())
    if (s != 2 * N + 1) throw GeometryError("box sides must be 2N+1");
  DirichletProblem prob{&env, VertexMask(env.size(), 1), ScalarField(env.size(), 0.0), true};
  for (Vertex x = 0; x < env.size(); ++x) {
    const long x1 = lat.coord(x, 0) - N;
    if (x1 == N || x1 == -N) {
      prob.interior[x] = 0;
      prob.boundary[x] = -static_cast<double>(x1);
    }
  }
  // Pieces touching no face are constant: zero energy.
  const auto res = solve_dirichlet(prob, opt);
  return {dirichlet_energy(env, res.f), res.residual, res.iterations};
}

/// G_Lambda(x, y): expected visits to y before leaving Lambda, for the chain
/// started at x. Computed as pi(y) (-L_Lambda)^{-1}(x, y).
inline double greens_function(const Environment& env, const VertexMask& Lambda, Vertex x, Vertex y,
                              const SolverOptions& opt = {}) {
  if (x >= env.size() || y >= env.size() || !Lambda[x] || !Lambda[y])
    throw PreconditionError("x and y must lie in Lambda");
  const auto pieces = detail::pieces_of(env, Lambda);
  if (!pieces.anchored[static_cast<std::size_t>(pieces.id[y])])
    throw ConsistencyError("no escape from Lambda (singular restriction)");
  if (pieces.id[x] != pieces.id[y]) return 0.0;
  VertexMask A(env.size(), 0);
  for (Vertex v = 0; v < env.size(); ++v) A[v] = pieces.id[v] == pieces.id[y] ? 1 : 0;
  ScalarField s(env.size(), 0.0);
  s[y] = -env.pi(y);
  const auto res = detail::solve_on(env, A, ScalarField(env.size(), 0.0), s, opt);
  return res.f[x];
}

/// Gauge for singular Poisson problems.
enum class PoissonGauge { vertex, zero_mean };

/// Solves L phi = rho. On torus or free domains the charge must vanish on the
/// component carrying it; phi is zero off that component and gauge-fixed by
/// phi(norm) = 0 (or zero mean on the component). On absorbing domains the
/// absorbing set carries phi = 0 and no gauge is applied.
inline SolveResult solve_poisson(const Environment& env, const ScalarField& rho, Vertex norm,
                                 const SolverOptions& opt = {}, PoissonGauge gauge = PoissonGauge::vertex) {
  const Lattice& lat = env.lattice();
  if (rho.size() != env.size() || norm >= env.size()) throw PreconditionError("Poisson data size mismatch");
  bool any = false;
  for (double v : rho) any |= (v != 0.0);
  if (!any) return {ScalarField(env.size(), 0.0), 0.0, 0};

  if (lat.mode() == BoundaryMode::absorbing) {
    VertexMask A(env.size(), 0);
    for (Vertex x = 0; x < env.size(); ++x) A[x] = !lat.is_absorbing(x) && env.pi(x) > 0.0;
    for (Vertex x = 0; x < env.size(); ++x)
      if (rho[x] != 0.0 && !A[x]) throw PreconditionError("charge on the absorbing set or a degenerate vertex");
    const auto pieces = detail::pieces_of(env, A);
    VertexMask keep(env.size(), 0);
    for (Vertex x = 0; x < env.size(); ++x) {
      if (!A[x]) continue;
      keep[x] = 1;
      if (!pieces.anchored[static_cast<std::size_t>(pieces.id[x])] && rho[x] != 0.0)
        throw ConsistencyError("charge on a piece with no escape");
    }
    // Free pieces without charge carry phi = 0.
    for (Vertex x = 0; x < env.size(); ++x)
      if (keep[x] && !pieces.anchored[static_cast<std::size_t>(pieces.id[x])]) keep[x] = 0;
    return detail::solve_on(env, keep, ScalarField(env.size(), 0.0), rho, opt);
  }

  // Component carrying the charge.
  Vertex seed = env.size();
  for (Vertex x = 0; x < env.size(); ++x)
    if (rho[x] != 0.0) {
      seed = x;
      break;
    }
  if (!(env.pi(seed) > 0.0)) throw DegenerateVertexError(seed);
  const VertexMask comp = reachable_from(env, seed, VertexMask(env.size(), 0));
  double total = 0.0, mass = 0.0;
  for (Vertex x = 0; x < env.size(); ++x) {
    if (rho[x] != 0.0 && !comp[x]) throw PreconditionError("charge spread over several components");
    total += rho[x];
    mass += std::abs(rho[x]);
  }
  if (std::abs(total) > 1e-12 * mass) throw ConsistencyError("nonzero total charge on a domain with constant kernel");
  if (gauge == PoissonGauge::vertex && !comp[norm]) throw PreconditionError("normalization vertex off the charged component");

  // Remove the rounding part of the charge so the system is consistent.
  ScalarField s = rho;
  std::size_t count = 0;
  for (Vertex x = 0; x < env.size(); ++x) count += comp[x];
  for (Vertex x = 0; x < env.size(); ++x)
    if (comp[x]) s[x] -= total / static_cast<double>(count);
  auto res = detail::solve_on(env, comp, ScalarField(env.size(), 0.0), s, opt);
  double shift = 0.0;
  if (gauge == PoissonGauge::vertex) {
    shift = res.f[norm];
  } else {
    for (Vertex x = 0; x < env.size(); ++x)
      if (comp[x]) shift += res.f[x];
    shift /= static_cast<double>(count);
  }
  for (Vertex x = 0; x < env.size(); ++x)
    if (comp[x]) res.f[x] -= shift;
  return res;
}

}  // namespace rcm
