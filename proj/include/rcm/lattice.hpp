#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rcm/errors.hpp"

namespace rcm {

using Vertex = std::size_t;
using Point = std::vector<long>;

enum class BoundaryMode : std::uint8_t { absorbing = 0, periodic = 1, free = 2 };

inline std::string to_string(BoundaryMode m) {
  switch (m) {
    case BoundaryMode::absorbing: return "absorbing";
    case BoundaryMode::periodic: return "periodic";
    case BoundaryMode::free: return "free";
  }
  return "unknown";
}

inline BoundaryMode parse_boundary_mode(const std::string& s) {
  if (s == "absorbing") return BoundaryMode::absorbing;
  if (s == "periodic" || s == "torus") return BoundaryMode::periodic;
  if (s == "free") return BoundaryMode::free;
  throw ParameterError("boundary", "unknown boundary mode '" + s + "'");
}

/// Finite box or torus in Z^d with nearest-neighbour edges.
///
/// Vertices are indexed lexicographically with the first coordinate most
/// significant. Each vertex has 2d neighbour slots ordered (+e_0, -e_0, +e_1,
/// -e_1, ...); a slot is empty when the box has no vertex there. Edges are
/// identified by their base vertex and direction, (x, x + e_i).
///
/// In absorbing mode the absorbing set defaults to the outer faces of the box;
/// walks stop there, kernels treat those vertices as cemetery states and
/// Dirichlet solvers use them as boundary.
class Lattice {
public:
  Lattice(std::vector<int> sides, BoundaryMode mode) : sides_(std::move(sides)), mode_(mode) {
    validate();
    build();
    if (mode_ == BoundaryMode::absorbing) {
      absorbing_.assign(size_, 0);
      for (Vertex v = 0; v < size_; ++v) absorbing_[v] = on_outer_face(v) ? 1 : 0;
    }
  }

  /// Absorbing-mode lattice with an explicit absorbing vertex set.
  Lattice(std::vector<int> sides, std::vector<std::uint8_t> absorbing)
      : sides_(std::move(sides)), mode_(BoundaryMode::absorbing), absorbing_(std::move(absorbing)),
        custom_absorbing_(true) {
    validate();
    build();
    if (absorbing_.size() != size_) throw ParameterError("absorbing", "mask size mismatch");
  }

  static std::shared_ptr<const Lattice> make(std::vector<int> sides, BoundaryMode mode) {
    return std::make_shared<const Lattice>(std::move(sides), mode);
  }
  static std::shared_ptr<const Lattice> cube(int dim, int side, BoundaryMode mode) {
    return make(std::vector<int>(static_cast<std::size_t>(dim), side), mode);
  }

  int dim() const noexcept { return static_cast<int>(sides_.size()); }
  int slots() const noexcept { return 2 * dim(); }
  const std::vector<int>& sides() const noexcept { return sides_; }
  int side(int i) const noexcept { return sides_[static_cast<std::size_t>(i)]; }
  BoundaryMode mode() const noexcept { return mode_; }
  bool periodic() const noexcept { return mode_ == BoundaryMode::periodic; }
  std::size_t size() const noexcept { return size_; }
  bool custom_absorbing() const noexcept { return custom_absorbing_; }

  static constexpr int slot_dir(int slot) noexcept { return slot / 2; }
  static constexpr int slot_sign(int slot) noexcept { return (slot % 2 == 0) ? 1 : -1; }
  static constexpr int slot_of(int dir, int sign) noexcept { return 2 * dir + (sign > 0 ? 0 : 1); }
  static constexpr int opposite(int slot) noexcept { return slot ^ 1; }

  /// Neighbour in the given slot, or -1.
  std::int64_t neighbor(Vertex v, int slot) const noexcept {
    return nbr_[v * static_cast<std::size_t>(slots()) + static_cast<std::size_t>(slot)];
  }

  long coord(Vertex v, int i) const noexcept {
    return static_cast<long>((v / strides_[static_cast<std::size_t>(i)]) %
                             static_cast<std::size_t>(sides_[static_cast<std::size_t>(i)]));
  }

  Point coords(Vertex v) const {
    Point x(sides_.size());
    for (int i = 0; i < dim(); ++i) x[static_cast<std::size_t>(i)] = coord(v, i);
    return x;
  }

  bool contains(std::span<const long> x) const noexcept {
    if (x.size() != sides_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < 0 || x[i] >= sides_[i]) return false;
    return true;
  }

  Vertex index(std::span<const long> x) const {
    if (!contains(x)) throw GeometryError("point outside lattice");
    Vertex v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) v += static_cast<Vertex>(x[i]) * strides_[i];
    return v;
  }

  /// Index of a point, wrapping coordinates on a torus.
  Vertex wrap_index(std::span<const long> x) const {
    Point y(x.begin(), x.end());
    if (periodic())
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = ((y[i] % sides_[i]) + sides_[i]) % sides_[i];
    return index(y);
  }

  /// Centre point (side / 2 in each coordinate), used as the origin.
  Point center() const {
    Point c(sides_.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = sides_[i] / 2;
    return c;
  }
  Vertex origin() const { return index(center()); }

  /// Coordinates of v relative to `base`, using the minimal image on a torus.
  Point relative(Vertex v, Vertex base) const {
    Point x(sides_.size());
    for (int i = 0; i < dim(); ++i) {
      long dx = coord(v, i) - coord(base, i);
      if (periodic()) {
        const long s = sides_[static_cast<std::size_t>(i)];
        dx = ((dx % s) + s) % s;
        if (dx > s / 2) dx -= s;
      }
      x[static_cast<std::size_t>(i)] = dx;
    }
    return x;
  }

  bool on_outer_face(Vertex v) const noexcept {
    for (int i = 0; i < dim(); ++i) {
      const long c = coord(v, i);
      if (c == 0 || c == sides_[static_cast<std::size_t>(i)] - 1) return true;
    }
    return false;
  }

  bool is_absorbing(Vertex v) const noexcept { return !absorbing_.empty() && absorbing_[v] != 0; }
  const std::vector<std::uint8_t>& absorbing_mask() const noexcept { return absorbing_; }

  bool has_forward_edge(Vertex v, int dir) const noexcept { return neighbor(v, slot_of(dir, 1)) >= 0; }

  std::size_t edge_count() const noexcept { return edge_count_; }

  /// Calls f(base, dir) for every edge in canonical order: direction-major,
  /// then lexicographic base vertex.
  template <class F>
  void for_each_edge(F&& f) const {
    for (int dir = 0; dir < dim(); ++dir)
      for (Vertex v = 0; v < size_; ++v)
        if (has_forward_edge(v, dir)) f(v, dir);
  }

  bool operator==(const Lattice& o) const {
    return sides_ == o.sides_ && mode_ == o.mode_ && absorbing_ == o.absorbing_;
  }

private:
  void validate() const {
    if (sides_.empty()) throw ParameterError("dimension", "must be >= 1");
    for (int s : sides_) {
      if (s < 1) throw ParameterError("sides", "every side must be positive");
      if (mode_ == BoundaryMode::periodic && s < 2)
        throw ParameterError("sides", "periodic sides must be >= 2");
    }
    double total = 1.0;
    for (int s : sides_) total *= s;
    if (total > 2.0e9) throw ParameterError("sides", "lattice too large");
  }

  void build() {
    const std::size_t d = sides_.size();
    strides_.assign(d, 1);
    for (std::size_t i = d - 1; i-- > 0;) strides_[i] = strides_[i + 1] * static_cast<std::size_t>(sides_[i + 1]);
    size_ = strides_[0] * static_cast<std::size_t>(sides_[0]);
    nbr_.assign(size_ * 2 * d, -1);
    edge_count_ = 0;
    for (Vertex v = 0; v < size_; ++v) {
      for (std::size_t i = 0; i < d; ++i) {
        const long c = coord(v, static_cast<int>(i));
        const long s = sides_[i];
        const auto stride = static_cast<std::int64_t>(strides_[i]);
        const auto base = static_cast<std::int64_t>(v);
        std::int64_t up = -1, down = -1;
        if (c + 1 < s) up = base + stride;
        else if (periodic()) up = base - (s - 1) * stride;
        if (c > 0) down = base - stride;
        else if (periodic()) down = base + (s - 1) * stride;
        nbr_[v * 2 * d + 2 * i] = up;
        nbr_[v * 2 * d + 2 * i + 1] = down;
        if (up >= 0) ++edge_count_;
      }
    }
  }

  std::vector<int> sides_;
  BoundaryMode mode_;
  std::vector<std::uint8_t> absorbing_;
  bool custom_absorbing_ = false;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  std::vector<std::int64_t> nbr_;
  std::size_t edge_count_ = 0;
};

using LatticePtr = std::shared_ptr<const Lattice>;

}  // namespace rcm
