#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"
#include "rcm/rng.hpp"

namespace rcm {

// ---------------------------------------------------------------------------
// Conductance distributions and environment laws
// ---------------------------------------------------------------------------

/// Single-edge conductance distribution.
struct Distribution {
  enum class Kind { constant, uniform, two_point, log_uniform };
  Kind kind = Kind::constant;
  double a = 1.0;  // constant value / lower end / first atom
  double b = 1.0;  // upper end / second atom
  double p = 1.0;  // weight of the first atom (two_point)

  static Distribution constant(double c) { return check({Kind::constant, c, c, 1.0}); }
  static Distribution uniform(double lo, double hi) { return check({Kind::uniform, lo, hi, 1.0}); }
  static Distribution log_uniform(double lo, double hi) { return check({Kind::log_uniform, lo, hi, 1.0}); }
  /// Value v1 with probability p1, otherwise v2.
  static Distribution two_point(double v1, double p1, double v2) {
    return check({Kind::two_point, v1, v2, p1});
  }

  static Distribution check(Distribution d) {
    auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
    if (!finite_nonneg(d.a)) throw ParameterError("distribution.a", "must be finite and >= 0");
    if (!finite_nonneg(d.b)) throw ParameterError("distribution.b", "must be finite and >= 0");
    if (d.kind == Kind::uniform || d.kind == Kind::log_uniform) {
      if (d.a > d.b) throw ParameterError("distribution.a", "lower end exceeds upper end");
      if (d.kind == Kind::log_uniform && d.a <= 0.0)
        throw ParameterError("distribution.a", "log_uniform needs a positive lower end");
    }
    if (d.kind == Kind::two_point && !(d.p >= 0.0 && d.p <= 1.0))
      throw ParameterError("distribution.p", "probability outside [0, 1]");
    return d;
  }

  double sample(CounterRng& rng) const {
    switch (kind) {
      case Kind::constant: return a;
      case Kind::uniform: return rng.uniform(a, b);
      case Kind::two_point: return rng.uniform() < p ? a : b;
      case Kind::log_uniform: return std::exp(rng.uniform(std::log(a), std::log(b)));
    }
    return a;
  }

  /// E(w) and E(1/w) in closed form (infinite when 1/w is not integrable).
  double mean() const {
    switch (kind) {
      case Kind::constant: return a;
      case Kind::uniform: return 0.5 * (a + b);
      case Kind::two_point: return p * a + (1 - p) * b;
      case Kind::log_uniform: return a == b ? a : (b - a) / std::log(b / a);
    }
    return a;
  }
  double mean_inverse() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind) {
      case Kind::constant: return a > 0 ? 1.0 / a : inf;
      case Kind::uniform:
        if (a <= 0) return inf;
        return a == b ? 1.0 / a : std::log(b / a) / (b - a);
      case Kind::two_point:
        if ((a <= 0 && p > 0) || (b <= 0 && p < 1)) return inf;
        return (p > 0 ? p / a : 0.0) + (p < 1 ? (1 - p) / b : 0.0);
      case Kind::log_uniform: return a == b ? 1.0 / a : (1.0 / a - 1.0 / b) / std::log(b / a);
    }
    return inf;
  }
};

/// Trap specification: a unit edge shielded by edges of
/// conductance `strength`, reached from the origin along a unit path.
struct TrapSpec {
  double strength = 0.1;
  Point access;  // lattice coordinates of the access vertex x
};

/// Random environment law.
struct EnvironmentLaw {
  enum class Kind { iid, percolation, line_constant, trap, constant };
  Kind kind = Kind::constant;
  Distribution dist = Distribution::constant(1.0);  // iid / line_constant / trap background
  double p = 1.0;                                   // percolation
  double c = 1.0;                                   // constant
  TrapSpec trap;                                    // trap

  static EnvironmentLaw iid(Distribution d) { return {Kind::iid, d, 1.0, 1.0, {}}; }
  static EnvironmentLaw percolation(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("law.p", "probability outside [0, 1]");
    return {Kind::percolation, Distribution::constant(1.0), p, 1.0, {}};
  }
  static EnvironmentLaw line_constant(Distribution d) { return {Kind::line_constant, d, 1.0, 1.0, {}}; }
  static EnvironmentLaw constant(double c) {
    if (!(std::isfinite(c) && c >= 0.0)) throw ParameterError("law.c", "must be finite and >= 0");
    return {Kind::constant, Distribution::constant(c), 1.0, c, {}};
  }
  /// Trap law; `background` supplies the conductances away from the trap.
  static EnvironmentLaw trap_law(TrapSpec spec, Distribution background) {
    if (!(spec.strength > 0.0 && std::isfinite(spec.strength)))
      throw ParameterError("law.trap.strength", "must be positive and finite");
    return {Kind::trap, background, 1.0, 1.0, std::move(spec)};
  }
};

inline std::string to_string(EnvironmentLaw::Kind k) {
  switch (k) {
    case EnvironmentLaw::Kind::iid: return "iid";
    case EnvironmentLaw::Kind::percolation: return "percolation";
    case EnvironmentLaw::Kind::line_constant: return "line_constant";
    case EnvironmentLaw::Kind::trap: return "trap";
    case EnvironmentLaw::Kind::constant: return "constant";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Symmetric nearest-neighbour conductances on a lattice.
///
/// One value is stored per undirected edge (base vertex, direction), so
/// symmetry holds by construction. Vertices with pi = 0 are allowed in storage
/// but rejected by the kernel operations.
class Environment {
public:
  explicit Environment(LatticePtr lattice)
      : lattice_(std::move(lattice)),
        cond_(lattice_->size() * static_cast<std::size_t>(lattice_->dim()), 0.0),
        pi_(lattice_->size(), 0.0) {}

  const Lattice& lattice() const noexcept { return *lattice_; }
  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }
  std::size_t size() const noexcept { return lattice_->size(); }
  int dim() const noexcept { return lattice_->dim(); }

  /// Conductance of the edge (v, v + e_dir); zero when that edge does not exist.
  double forward(Vertex v, int dir) const noexcept {
    return cond_[v * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(dir)];
  }

  /// Conductance towards the neighbour in `slot` (zero for an empty slot).
  double omega(Vertex v, int slot) const noexcept {
    const int dir = Lattice::slot_dir(slot);
    if (Lattice::slot_sign(slot) > 0) return forward(v, dir);
    const std::int64_t n = lattice_->neighbor(v, slot);
    return n < 0 ? 0.0 : forward(static_cast<Vertex>(n), dir);
  }

  double pi(Vertex v) const noexcept { return pi_[v]; }
  const std::vector<double>& pi_vector() const noexcept { return pi_; }

  /// Sets the conductance of edge (v, v + e_dir) and keeps pi consistent.
  void set_forward(Vertex v, int dir, double value) {
    if (!(std::isfinite(value) && value >= 0.0))
      throw ParameterError("conductance", "must be finite and >= 0");
    const std::int64_t n = lattice_->neighbor(v, Lattice::slot_of(dir, 1));
    if (n < 0) throw GeometryError("edge does not exist");
    double& slot = cond_[v * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(dir)];
    const double delta = value - slot;
    slot = value;
    pi_[v] += delta;
    pi_[static_cast<Vertex>(n)] += delta;
  }

  /// Sets the conductance between v and its neighbour in `slot`.
  void set_omega(Vertex v, int slot, double value) {
    if (Lattice::slot_sign(slot) > 0) return set_forward(v, Lattice::slot_dir(slot), value);
    const std::int64_t n = lattice_->neighbor(v, slot);
    if (n < 0) throw GeometryError("edge does not exist");
    set_forward(static_cast<Vertex>(n), Lattice::slot_dir(slot), value);
  }

  /// Edge values in canonical order.
  std::vector<double> edge_values() const {
    std::vector<double> out;
    out.reserve(lattice_->edge_count());
    lattice_->for_each_edge([&](Vertex v, int dir) { out.push_back(forward(v, dir)); });
    return out;
  }

  /// Returns a copy with every conductance multiplied by `factor`.
  Environment scaled(double factor) const {
    Environment e(*this);
    for (auto& c : e.cond_) c *= factor;
    recompute_pi(e);
    return e;
  }

  /// Recomputes pi from scratch (exact sums in canonical slot order).
  void refresh_pi() { recompute_pi(*this); }

  bool operator==(const Environment& o) const { return *lattice_ == *o.lattice_ && cond_ == o.cond_; }

  /// Raw forward-conductance storage, indexed v * d + dir.
  const std::vector<double>& raw() const noexcept { return cond_; }

private:
  static void recompute_pi(Environment& e) {
    const int s = e.lattice_->slots();
    for (Vertex v = 0; v < e.size(); ++v) {
      double sum = 0.0;
      for (int k = 0; k < s; ++k) sum += e.omega(v, k);
      e.pi_[v] = sum;
    }
  }

  LatticePtr lattice_;
  std::vector<double> cond_;
  std::vector<double> pi_;
};

/// pi(x) = sum of the incident conductances.
inline double pi_weight(const Environment& env, Vertex x) {
  if (x >= env.size()) throw PreconditionError("vertex outside domain");
  return env.pi(x);
}

/// One-step transition probabilities, one entry per neighbour slot in the order
/// (+e_0, -e_0, +e_1, -e_1, ...). Entries are omega / pi; the last positive
/// entry absorbs the rounding residual so the row sums to exactly one.
inline std::vector<double> transition_row(const Environment& env, Vertex x) {
  if (x >= env.size()) throw PreconditionError("vertex outside domain");
  const double pi = env.pi(x);
  if (!(pi > 0.0)) throw DegenerateVertexError(x);
  const int s = env.lattice().slots();
  std::vector<double> row(static_cast<std::size_t>(s), 0.0);
  int last = -1;
  double acc = 0.0;
  for (int k = 0; k < s; ++k) {
    const double w = env.omega(x, k);
    if (w > 0.0) {
      row[static_cast<std::size_t>(k)] = w / pi;
      last = k;
    }
  }
  for (int k = 0; k < s; ++k)
    if (k != last) acc += row[static_cast<std::size_t>(k)];
  row[static_cast<std::size_t>(last)] = 1.0 - acc;
  return row;
}

/// Discrete-time local drift: sum over neighbours of P(x, y) (y - x).
inline std::vector<double> local_drift(const Environment& env, Vertex x) {
  const auto row = transition_row(env, x);
  std::vector<double> drift(static_cast<std::size_t>(env.dim()), 0.0);
  for (int k = 0; k < env.lattice().slots(); ++k)
    drift[static_cast<std::size_t>(Lattice::slot_dir(k))] +=
        Lattice::slot_sign(k) * row[static_cast<std::size_t>(k)];
  return drift;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Canonical index of edge (v, v + e_dir) within the canonical edge order.
class EdgeIndexer {
public:
  explicit EdgeIndexer(const Lattice& lat) : lat_(lat) {
    offsets_.assign(static_cast<std::size_t>(lat.dim()) + 1, 0);
    for (int dir = 0; dir < lat.dim(); ++dir) {
      std::size_t count = 1;
      for (int i = 0; i < lat.dim(); ++i) {
        const auto s = static_cast<std::size_t>(lat.side(i));
        count *= (i == dir && !lat.periodic()) ? s - 1 : s;
      }
      offsets_[static_cast<std::size_t>(dir) + 1] = offsets_[static_cast<std::size_t>(dir)] + count;
    }
  }

  std::size_t operator()(Vertex v, int dir) const {
    std::size_t idx = 0;
    for (int i = 0; i < lat_.dim(); ++i) {
      const auto s = static_cast<std::size_t>(lat_.side(i));
      const std::size_t radix = (i == dir && !lat_.periodic()) ? s - 1 : s;
      idx = idx * radix + static_cast<std::size_t>(lat_.coord(v, i));
    }
    return offsets_[static_cast<std::size_t>(dir)] + idx;
  }

private:
  const Lattice& lat_;
  std::vector<std::size_t> offsets_;
};

namespace detail {

/// Index of the lattice line through v parallel to e_dir, canonical per direction.
inline std::uint64_t line_index(const Lattice& lat, Vertex v, int dir) {
  std::uint64_t idx = static_cast<std::uint64_t>(dir);
  for (int i = 0; i < lat.dim(); ++i) {
    if (i == dir) continue;
    idx = idx * static_cast<std::uint64_t>(lat.side(i)) + static_cast<std::uint64_t>(lat.coord(v, i));
  }
  return idx;
}

}  // namespace detail

/// Geometry of an inserted trap.
struct TrapGeometry {
  Vertex origin = 0;
  Vertex access = 0;                // x
  Vertex core_a = 0;                // trap vertex adjacent to x
  Vertex core_b = 0;                // far trap vertex
  std::vector<Vertex> path;         // origin ... access, unit conductances
  double strength = 0.0;
};

/// Inserts a trap into `env` in place and returns its geometry. The core edge
/// (a, b) extends away from the origin along the line on which the access
/// path arrives at x.
inline TrapGeometry insert_trap(Environment& env, const TrapSpec& spec) {
  const Lattice& lat = env.lattice();
  if (lat.dim() < 2) throw GeometryError("trap needs dimension >= 2");
  if (!(spec.strength > 0.0)) throw ParameterError("trap.strength", "must be positive");
  if (static_cast<int>(spec.access.size()) != lat.dim() || !lat.contains(spec.access))
    throw GeometryError("trap access vertex outside lattice");

  TrapGeometry g;
  g.strength = spec.strength;
  g.origin = lat.origin();
  const Point start = lat.center();
  Point cur = start;
  g.path.push_back(lat.index(cur));
  int core_slot = Lattice::slot_of(0, 1);
  for (int i = 0; i < lat.dim(); ++i) {
    const long target = spec.access[static_cast<std::size_t>(i)];
    const int sign = target >= cur[static_cast<std::size_t>(i)] ? 1 : -1;
    while (cur[static_cast<std::size_t>(i)] != target) {
      cur[static_cast<std::size_t>(i)] += sign;
      g.path.push_back(lat.index(cur));
      core_slot = Lattice::slot_of(i, sign);
    }
  }
  g.access = g.path.back();
  auto step = [&](Vertex v) {
    const std::int64_t n = lat.neighbor(v, core_slot);
    if (n < 0) throw GeometryError("trap does not fit inside the lattice");
    return static_cast<Vertex>(n);
  };
  g.core_a = step(g.access);
  g.core_b = step(g.core_a);
  for (Vertex c : {g.core_a, g.core_b}) {
    if (lat.is_absorbing(c)) throw GeometryError("trap core on the absorbing boundary");
    for (int k = 0; k < lat.slots(); ++k)
      if (lat.neighbor(c, k) < 0) throw GeometryError("trap shield edge missing at the lattice boundary");
    for (Vertex p : g.path)
      if (p == c) throw GeometryError("access path runs through the trap core");
  }
  for (std::size_t k = 0; k + 1 < g.path.size(); ++k) {
    for (int s = 0; s < lat.slots(); ++s)
      if (lat.neighbor(g.path[k], s) == static_cast<std::int64_t>(g.path[k + 1])) {
        env.set_omega(g.path[k], s, 1.0);
        break;
      }
  }
  for (Vertex c : {g.core_a, g.core_b})
    for (int k = 0; k < lat.slots(); ++k) env.set_omega(c, k, spec.strength);
  env.set_omega(g.core_a, core_slot, 1.0);
  return g;
}

/// Samples an environment. Deterministic in (law, lattice, seed): each edge
/// draws from its own stream indexed by the canonical edge index, each line
/// (line_constant) from a stream indexed by the line.
inline Environment build_environment(const EnvironmentLaw& law, LatticePtr lattice, std::uint64_t seed) {
  Environment env(std::move(lattice));
  const Lattice& lat = env.lattice();
  const EdgeIndexer edge_index(lat);
  using K = EnvironmentLaw::Kind;
  lat.for_each_edge([&](Vertex v, int dir) {
    double value = 0.0;
    switch (law.kind) {
      case K::constant: value = law.c; break;
      case K::percolation: {
        CounterRng rng(seed, stream_id(StreamTag::edge, edge_index(v, dir)));
        value = rng.uniform() < law.p ? 1.0 : 0.0;
        break;
      }
      case K::iid:
      case K::trap: {
        CounterRng rng(seed, stream_id(StreamTag::edge, edge_index(v, dir)));
        value = law.dist.sample(rng);
        break;
      }
      case K::line_constant: {
        CounterRng rng(seed, stream_id(StreamTag::line, detail::line_index(lat, v, dir)));
        value = law.dist.sample(rng);
        break;
      }
    }
    env.set_forward(v, dir, value);
  });
  if (law.kind == K::trap) insert_trap(env, law.trap);
  env.refresh_pi();
  return env;
}

/// Builds a background environment and inserts a trap of the given strength
/// with access vertex `access`.
inline std::pair<Environment, TrapGeometry> build_trap_environment(LatticePtr lattice, double strength,
                                                                   const Point& access,
                                                                   const EnvironmentLaw& background,
                                                                   std::uint64_t seed) {
  if (lattice->dim() < 2) throw GeometryError("trap needs dimension >= 2");
  Environment env = build_environment(background, std::move(lattice), seed);
  TrapGeometry g = insert_trap(env, TrapSpec{strength, access});
  env.refresh_pi();
  return {std::move(env), std::move(g)};
}

}  // namespace rcm
