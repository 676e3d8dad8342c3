#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rcm/environment.hpp"

namespace rcm {

/// Connected components of the positive-conductance subgraph.
///
/// A component is identified by its smallest vertex index. Vertices with no
/// positive incident edge are unlabeled (`kNone`).
struct ClusterLabeling {
  static constexpr std::int64_t kNone = -1;

  std::vector<std::int64_t> label;          // per vertex
  std::vector<Vertex> ids;                  // component ids, ascending
  std::vector<std::size_t> sizes;           // parallel to ids
  std::int64_t largest = kNone;
  std::int64_t crossing = kNone;            // component touching two opposite faces

  std::size_t component_count() const noexcept { return ids.size(); }

  std::size_t size_of(std::int64_t id) const {
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (static_cast<std::int64_t>(ids[k]) == id) return sizes[k];
    return 0;
  }
};

namespace detail {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

}  // namespace detail

inline ClusterLabeling label_clusters(const Environment& env) {
  const Lattice& lat = env.lattice();
  const std::size_t n = lat.size();
  detail::UnionFind uf(n);
  lat.for_each_edge([&](Vertex v, int dir) {
    if (env.forward(v, dir) > 0.0)
      uf.unite(v, static_cast<std::size_t>(lat.neighbor(v, Lattice::slot_of(dir, 1))));
  });

  ClusterLabeling out;
  out.label.assign(n, ClusterLabeling::kNone);
  std::vector<std::int64_t> root_label(n, ClusterLabeling::kNone);
  std::vector<std::size_t> slot_of_root(n, 0);
  for (Vertex v = 0; v < n; ++v) {
    if (!(env.pi(v) > 0.0)) continue;
    const std::size_t r = uf.find(v);
    if (root_label[r] == ClusterLabeling::kNone) {
      root_label[r] = static_cast<std::int64_t>(v);  // first visit is the smallest index
      slot_of_root[r] = out.ids.size();
      out.ids.push_back(v);
      out.sizes.push_back(0);
    }
    out.label[v] = root_label[r];
    ++out.sizes[slot_of_root[r]];
  }

  std::size_t best = 0;
  for (std::size_t k = 0; k < out.ids.size(); ++k)
    if (out.sizes[k] > best) {
      best = out.sizes[k];
      out.largest = static_cast<std::int64_t>(out.ids[k]);
    }

  // Crossing: touches both faces x_i = 0 and x_i = side - 1 for some i.
  if (!lat.periodic()) {
    const int d = lat.dim();
    std::vector<std::uint32_t> touch(out.ids.size(), 0);  // bit 2i: low face, 2i+1: high face
    std::vector<std::size_t> pos(n, 0);
    for (std::size_t k = 0; k < out.ids.size(); ++k) pos[out.ids[k]] = k;
    for (Vertex v = 0; v < n; ++v) {
      if (out.label[v] == ClusterLabeling::kNone) continue;
      const std::size_t k = pos[static_cast<std::size_t>(out.label[v])];
      for (int i = 0; i < d; ++i) {
        const long c = lat.coord(v, i);
        if (c == 0) touch[k] |= 1u << (2 * i);
        if (c == lat.side(i) - 1) touch[k] |= 1u << (2 * i + 1);
      }
    }
    std::size_t best_cross = 0;
    for (std::size_t k = 0; k < out.ids.size(); ++k) {
      bool crosses = false;
      for (int i = 0; i < d; ++i)
        if (((touch[k] >> (2 * i)) & 3u) == 3u) crosses = true;
      if (crosses && out.sizes[k] > best_cross) {
        best_cross = out.sizes[k];
        out.crossing = static_cast<std::int64_t>(out.ids[k]);
      }
    }
  }
  return out;
}

struct LargestPolicy {};
struct CrossingPolicy {};
struct ContainingPolicy {
  Vertex vertex;
};
using ClusterPolicy = std::variant<LargestPolicy, CrossingPolicy, ContainingPolicy>;

/// Vertex set of the selected component, in ascending order.
inline std::vector<Vertex> working_cluster(const ClusterLabeling& lab, const ClusterPolicy& policy) {
  std::int64_t id = ClusterLabeling::kNone;
  if (std::holds_alternative<LargestPolicy>(policy)) {
    id = lab.largest;
    if (id == ClusterLabeling::kNone) throw SelectionError("no labeled component");
  } else if (std::holds_alternative<CrossingPolicy>(policy)) {
    id = lab.crossing;
    if (id == ClusterLabeling::kNone) throw SelectionError("no crossing component");
  } else {
    const Vertex v = std::get<ContainingPolicy>(policy).vertex;
    if (v >= lab.label.size()) throw SelectionError("vertex outside domain");
    id = lab.label[v];
    if (id == ClusterLabeling::kNone) throw SelectionError("vertex " + std::to_string(v) + " is unlabeled");
  }
  std::vector<Vertex> out;
  for (Vertex v = 0; v < lab.label.size(); ++v)
    if (lab.label[v] == id) out.push_back(v);
  return out;
}

/// Crossing component when one exists, otherwise the largest.
inline std::vector<Vertex> default_working_cluster(const ClusterLabeling& lab) {
  if (lab.crossing != ClusterLabeling::kNone) return working_cluster(lab, CrossingPolicy{});
  return working_cluster(lab, LargestPolicy{});
}

inline nlohmann::json to_json(const ClusterLabeling& lab) {
  nlohmann::json j;
  j["labels"] = lab.label;
  j["components"] = nlohmann::json::array();
  for (std::size_t k = 0; k < lab.ids.size(); ++k)
    j["components"].push_back({{"id", lab.ids[k]}, {"size", lab.sizes[k]}});
  j["largest"] = lab.largest;
  j["crossing"] = lab.crossing;
  return j;
}

/// Membership mask for a vertex set.
inline std::vector<std::uint8_t> vertex_mask(std::size_t n, const std::vector<Vertex>& set) {
  std::vector<std::uint8_t> m(n, 0);
  for (Vertex v : set) m[v] = 1;
  return m;
}

}  // namespace rcm
