#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"

namespace rcm {

/// A walk trajectory. `slots[k]` is the neighbour slot taken on step k, so the
/// displacement in the universal cover is recoverable on a torus.
struct WalkPath {
  Vertex start = 0;
  std::vector<Vertex> vertices;   // vertices[0] == start
  std::vector<int> slots;         // size vertices.size() - 1
  std::vector<double> times;      // continuous time only; times[0] == 0
  bool absorbed = false;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t steps() const noexcept { return slots.size(); }
  Vertex end() const noexcept { return vertices.back(); }
};

/// Displacement X_n - X_0 in the universal cover.
inline std::vector<double> displacement(const WalkPath& path, int dim) {
  std::vector<double> x(static_cast<std::size_t>(dim), 0.0);
  for (int s : path.slots) x[static_cast<std::size_t>(Lattice::slot_dir(s))] += Lattice::slot_sign(s);
  return x;
}

namespace detail {

/// Samples a neighbour slot of x with probability omega / pi.
inline int sample_slot(const Environment& env, Vertex x, CounterRng& rng) {
  const double pi = env.pi(x);
  if (!(pi > 0.0)) throw DegenerateVertexError(x);
  const double u = rng.uniform() * pi;
  const int s = env.lattice().slots();
  double acc = 0.0;
  int last = -1;
  for (int k = 0; k < s; ++k) {
    const double w = env.omega(x, k);
    if (w <= 0.0) continue;
    acc += w;
    last = k;
    if (u < acc) return k;
  }
  return last;
}

inline void check_start(const Environment& env, Vertex x0, const std::vector<std::uint8_t>* cluster) {
  if (x0 >= env.size()) throw PreconditionError("start vertex outside domain");
  if (!(env.pi(x0) > 0.0)) throw DegenerateVertexError(x0);
  if (cluster && !(*cluster)[x0]) throw PreconditionError("start vertex outside the working cluster");
}

enum class Clock { none, constant, variable };

inline WalkPath run_walk(const Environment& env, Vertex x0, std::size_t n_steps, double t_max, Clock clock,
                         std::uint64_t seed, std::uint64_t index, const std::vector<std::uint8_t>* cluster) {
  check_start(env, x0, cluster);
  if (clock != Clock::none && !(t_max >= 0.0)) throw ParameterError("t_max", "must be >= 0");
  const Lattice& lat = env.lattice();
  CounterRng jumps(seed, stream_id(StreamTag::walk, index));
  CounterRng holds(seed, stream_id(StreamTag::clock, index));
  WalkPath p;
  p.start = x0;
  p.seed = seed;
  p.stream = index;
  p.vertices.push_back(x0);
  if (clock != Clock::none) p.times.push_back(0.0);
  Vertex x = x0;
  double t = 0.0;
  for (std::size_t k = 0; clock != Clock::none || k < n_steps; ++k) {
    if (lat.is_absorbing(x)) {
      p.absorbed = true;
      break;
    }
    if (clock != Clock::none) {
      t += holds.exponential(clock == Clock::constant ? 1.0 : env.pi(x));
      if (t > t_max) break;
      p.times.push_back(t);
    }
    const int s = sample_slot(env, x, jumps);
    x = static_cast<Vertex>(lat.neighbor(x, s));
    p.slots.push_back(s);
    p.vertices.push_back(x);
  }
  return p;
}

}  // namespace detail

/// Discrete-time chain with kernel P(x, y) = omega_xy / pi(x). Stops early when
/// it enters an absorbing vertex.
inline WalkPath simulate_discrete(const Environment& env, Vertex x0, std::size_t n_steps, std::uint64_t seed,
                                  std::uint64_t index = 0, const std::vector<std::uint8_t>* cluster = nullptr) {
  return detail::run_walk(env, x0, n_steps, 0.0, detail::Clock::none, seed, index, cluster);
}

/// Constant-speed walk: exponential(1) holding times. The jump chain uses the
/// same stream as simulate_discrete, so it reproduces the discrete path.
inline WalkPath simulate_csrw(const Environment& env, Vertex x0, double t_max, std::uint64_t seed,
                              std::uint64_t index = 0, const std::vector<std::uint8_t>* cluster = nullptr) {
  return detail::run_walk(env, x0, 0, t_max, detail::Clock::constant, seed, index, cluster);
}

/// Variable-speed walk: exponential(pi(x)) holding times.
inline WalkPath simulate_vsrw(const Environment& env, Vertex x0, double t_max, std::uint64_t seed,
                              std::uint64_t index = 0, const std::vector<std::uint8_t>* cluster = nullptr) {
  return detail::run_walk(env, x0, 0, t_max, detail::Clock::variable, seed, index, cluster);
}

/// Position of a continuous-time path at time t.
inline Vertex position_at(const WalkPath& p, double t) {
  std::size_t k = 0;
  while (k + 1 < p.times.size() && p.times[k + 1] <= t) ++k;
  return p.vertices[k];
}

/// Running sums of 1/pi(X_k), k = 0..m.
inline std::vector<double> blowup_statistic(const WalkPath& path, const Environment& env) {
  std::vector<double> out;
  out.reserve(path.vertices.size());
  double acc = 0.0;
  for (Vertex v : path.vertices) {
    acc += 1.0 / env.pi(v);
    out.push_back(acc);
  }
  return out;
}

/// Endpoints X_n / sqrt(n) of n_walks independent walks (walk i uses stream i).
inline std::vector<std::vector<double>> scaled_endpoint_samples(const Environment& env, Vertex x0, std::size_t n,
                                                                std::size_t n_walks, std::uint64_t seed,
                                                                unsigned workers = 0) {
  if (n == 0) throw ParameterError("n", "must be >= 1");
  detail::check_start(env, x0, nullptr);
  std::vector<std::vector<double>> out(n_walks);
  const Lattice& lat = env.lattice();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  parallel_for(
      n_walks,
      [&](std::size_t i) {
        CounterRng rng(seed, stream_id(StreamTag::walk, i));
        std::vector<long> disp(static_cast<std::size_t>(env.dim()), 0);
        Vertex x = x0;
        for (std::size_t k = 0; k < n && !lat.is_absorbing(x); ++k) {
          const int s = detail::sample_slot(env, x, rng);
          disp[static_cast<std::size_t>(Lattice::slot_dir(s))] += Lattice::slot_sign(s);
          x = static_cast<Vertex>(lat.neighbor(x, s));
        }
        std::vector<double> y(disp.size());
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = static_cast<double>(disp[j]) * scale;
        out[i] = std::move(y);
      },
      workers);
  return out;
}

/// f(omega) = E_x |e_dir . X_1|^2, the one-step variance along `dir` at x.
inline double step_variance(const Environment& env, Vertex x, int dir) {
  const double pi = env.pi(x);
  if (!(pi > 0.0)) throw DegenerateVertexError(x);
  return (env.omega(x, Lattice::slot_of(dir, 1)) + env.omega(x, Lattice::slot_of(dir, -1))) / pi;
}

/// Time average of step_variance along a path (the ergodic estimator of the
/// limiting variance for balanced environments).
inline double ergodic_step_variance(const Environment& env, const WalkPath& path, int dir) {
  double acc = 0.0;
  for (Vertex v : path.vertices) acc += step_variance(env, v, dir);
  return acc / static_cast<double>(path.vertices.size());
}

/// pi-weighted spatial average of step_variance over a torus, the exact
/// stationary mean of the ergodic estimator.
inline double stationary_step_variance(const Environment& env, int dir) {
  double num = 0.0, den = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) {
    if (!(env.pi(v) > 0.0)) continue;
    num += env.pi(v) * step_variance(env, v, dir);
    den += env.pi(v);
  }
  return num / den;
}

/// Runs the discrete chain from x0 until it enters `target` (the start counts
/// only when `include_start`). Returns the hit vertex, or nullopt after
/// max_steps.
inline std::optional<Vertex> first_hit(const Environment& env, Vertex x0, const std::vector<std::uint8_t>& target,
                                       std::uint64_t seed, std::uint64_t index, std::size_t max_steps,
                                       bool include_start = true) {
  if (include_start && target[x0]) return x0;
  detail::check_start(env, x0, nullptr);
  CounterRng rng(seed, stream_id(StreamTag::walk, index));
  const Lattice& lat = env.lattice();
  Vertex x = x0;
  for (std::size_t k = 0; k < max_steps; ++k) {
    x = static_cast<Vertex>(lat.neighbor(x, detail::sample_slot(env, x, rng)));
    if (target[x]) return x;
  }
  return std::nullopt;
}

}  // namespace rcm
