#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/environment.hpp"

namespace rcm {

// Binary layout: "RCM1", u32 d, d x u32 sides, u8 boundary mode, then one
// little-endian f64 per edge in canonical order.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class ByteReader {
public:
  explicit ByteReader(const std::string& s) : s_(s) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > s_.size()) throw FormatError("truncated environment stream");
    const auto* p = reinterpret_cast<const unsigned char*>(s_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::uint8_t u8() { return *take(1); }
  double f64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return std::bit_cast<double>(v);
  }
  bool done() const { return pos_ == s_.size(); }

private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

inline void require_serializable(const Environment& env) {
  if (env.lattice().custom_absorbing())
    throw FormatError("environments with a custom absorbing set cannot be serialized");
}

inline LatticePtr lattice_from_header(const std::vector<int>& sides, std::uint8_t mode) {
  if (mode > 2) throw FormatError("unknown boundary mode byte " + std::to_string(mode));
  try {
    return Lattice::make(sides, static_cast<BoundaryMode>(mode));
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid lattice header: ") + e.what());
  }
}

}  // namespace detail

inline constexpr char kEnvMagic[4] = {'R', 'C', 'M', '1'};

/// Size of the binary header for a d-dimensional environment.
constexpr std::size_t binary_header_size(int d) noexcept { return 4 + 4 + 4 * static_cast<std::size_t>(d) + 1; }

inline std::string serialize(const Environment& env) {
  detail::require_serializable(env);
  const Lattice& lat = env.lattice();
  std::string out;
  out.reserve(binary_header_size(lat.dim()) + 8 * lat.edge_count());
  out.append(kEnvMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(lat.dim()));
  for (int s : lat.sides()) detail::put_u32(out, static_cast<std::uint32_t>(s));
  out.push_back(static_cast<char>(lat.mode()));
  lat.for_each_edge([&](Vertex v, int dir) { detail::put_f64(out, env.forward(v, dir)); });
  return out;
}

inline Environment deserialize(const std::string& bytes) {
  detail::ByteReader r(bytes);
  const auto* magic = r.take(4);
  if (std::memcmp(magic, kEnvMagic, 4) != 0) throw FormatError("bad magic bytes (expected RCM1)");
  const std::uint32_t d = r.u32();
  if (d == 0 || d > 16) throw FormatError("unsupported dimension " + std::to_string(d));
  std::vector<int> sides(d);
  for (auto& s : sides) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 30)) throw FormatError("invalid side length");
    s = static_cast<int>(v);
  }
  Environment env(detail::lattice_from_header(sides, r.u8()));
  const Lattice& lat = env.lattice();
  lat.for_each_edge([&](Vertex v, int dir) {
    const double x = r.f64();
    if (!(std::isfinite(x) && x >= 0.0)) throw FormatError("invalid conductance value");
    env.set_forward(v, dir, x);
  });
  if (!r.done()) throw FormatError("trailing bytes after edge data");
  env.refresh_pi();
  return env;
}

inline void write_binary(std::ostream& os, const Environment& env) {
  const std::string s = serialize(env);
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline Environment read_binary(std::istream& is) {
  std::ostringstream buf;
  buf << is.rdbuf();
  return deserialize(buf.str());
}

/// JSON debug form with the same fields as the binary format.
inline nlohmann::json to_json(const Environment& env) {
  detail::require_serializable(env);
  nlohmann::json j;
  j["magic"] = "RCM1";
  j["dimension"] = env.dim();
  j["sides"] = env.lattice().sides();
  j["boundary_mode"] = to_string(env.lattice().mode());
  j["edges"] = env.edge_values();
  return j;
}

inline Environment environment_from_json(const nlohmann::json& j) {
  try {
    if (j.at("magic").get<std::string>() != "RCM1") throw FormatError("bad magic in JSON environment");
    const auto sides = j.at("sides").get<std::vector<int>>();
    if (j.at("dimension").get<std::size_t>() != sides.size()) throw FormatError("dimension/sides mismatch");
    BoundaryMode mode;
    try {
      mode = parse_boundary_mode(j.at("boundary_mode").get<std::string>());
    } catch (const ParameterError& e) {
      throw FormatError(e.what());
    }
    Environment env(detail::lattice_from_header(sides, static_cast<std::uint8_t>(mode)));
    const auto values = j.at("edges").get<std::vector<double>>();
    if (values.size() != env.lattice().edge_count()) throw FormatError("edge count mismatch");
    std::size_t k = 0;
    env.lattice().for_each_edge([&](Vertex v, int dir) {
      const double x = values[k++];
      if (!(std::isfinite(x) && x >= 0.0)) throw FormatError("invalid conductance value");
      env.set_forward(v, dir, x);
    });
    env.refresh_pi();
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed JSON environment: ") + e.what());
  }
}

}  // namespace rcm
