#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/environment.hpp"
#include "rcm/homogenize.hpp"
#include "rcm/potential.hpp"

namespace rcm {

/// Malformed configuration; `path()` names the offending field.
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& what) : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "gen-env", "walk",         "resistance", "plate",     "boxcond",     "embed",     "corrector", "diffmat",
      "heatkernel", "isoperimetry", "trap",    "gradfield", "gff-scaling", "homogenize", "resolvent"};
  return names;
}

struct DistributionConfig {
  std::string kind = "constant";
  double a = 1.0;
  double b = 1.0;
  double p = 1.0;
};

struct LawConfig {
  std::string kind = "constant";
  double c = 1.0;
  double p = 1.0;
  DistributionConfig distribution;
  double trap_strength = 0.1;
  std::vector<long> trap_access;
};

struct DomainConfig {
  int dim = 2;
  std::vector<int> sides{32, 32};
  std::string boundary = "periodic";
};

struct SolverConfig {
  std::string method = "cg";
  double tol = 1e-10;
  std::size_t max_iterations = 0;
};

struct OutputConfig {
  std::string path = "-";
  std::string format = "csv";
};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;
  DomainConfig domain;
  LawConfig law;
  SolverConfig solver;
  OutputConfig output;
  YAML::Node params{YAML::NodeType::Map};
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T read_as(const YAML::Node& n, const std::string& path) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "wrong type");
  }
}

template <class T>
void read_field(const YAML::Node& parent, const char* key, T& out, const std::string& path) {
  if (const auto n = parent[key]) out = read_as<T>(n, path + "." + key);
}

inline void check_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) throw ConfigError(path, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

}  // namespace detail

/// Parses the YAML configuration grammar documented in the README.
inline ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config", std::string("YAML syntax: ") + e.what());
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  detail::check_keys(root, "", {"command", "seed", "domain", "law", "solver", "output", "params"});
  detail::read_field(root, "command", c.command, "");
  if (const auto n = root["seed"]) c.seed = detail::read_as<std::uint64_t>(n, "seed");
  if (const auto d = root["domain"]) {
    detail::check_keys(d, "domain", {"dim", "side", "sides", "boundary"});
    detail::read_field(d, "dim", c.domain.dim, "domain");
    detail::read_field(d, "boundary", c.domain.boundary, "domain");
    if (d["sides"]) {
      c.domain.sides = detail::read_as<std::vector<int>>(d["sides"], "domain.sides");
      if (!d["dim"]) c.domain.dim = static_cast<int>(c.domain.sides.size());
    } else if (d["side"]) {
      const int s = detail::read_as<int>(d["side"], "domain.side");
      c.domain.sides.assign(static_cast<std::size_t>(std::max(c.domain.dim, 0)), s);
    } else {
      c.domain.sides.assign(static_cast<std::size_t>(std::max(c.domain.dim, 0)), 32);
    }
  }
  if (const auto l = root["law"]) {
    detail::check_keys(l, "law", {"kind", "c", "p", "distribution", "trap"});
    detail::read_field(l, "kind", c.law.kind, "law");
    detail::read_field(l, "c", c.law.c, "law");
    detail::read_field(l, "p", c.law.p, "law");
    if (const auto d = l["distribution"]) {
      detail::check_keys(d, "law.distribution", {"kind", "a", "b", "p"});
      detail::read_field(d, "kind", c.law.distribution.kind, "law.distribution");
      detail::read_field(d, "a", c.law.distribution.a, "law.distribution");
      detail::read_field(d, "b", c.law.distribution.b, "law.distribution");
      detail::read_field(d, "p", c.law.distribution.p, "law.distribution");
    }
    if (const auto t = l["trap"]) {
      detail::check_keys(t, "law.trap", {"strength", "access"});
      detail::read_field(t, "strength", c.law.trap_strength, "law.trap");
      detail::read_field(t, "access", c.law.trap_access, "law.trap");
    }
  }
  if (const auto s = root["solver"]) {
    detail::check_keys(s, "solver", {"method", "tol", "max_iterations"});
    detail::read_field(s, "method", c.solver.method, "solver");
    detail::read_field(s, "tol", c.solver.tol, "solver");
    detail::read_field(s, "max_iterations", c.solver.max_iterations, "solver");
  }
  if (const auto o = root["output"]) {
    detail::check_keys(o, "output", {"path", "format"});
    detail::read_field(o, "path", c.output.path, "output");
    detail::read_field(o, "format", c.output.format, "output");
  }
  if (const auto p = root["params"]) {
    if (!p.IsMap()) throw ConfigError("params", "expected a mapping");
    c.params = YAML::Clone(p);
  }
  return c;
}

/// Parses config text. Outputs produced by `rcm` are accepted too: the
/// embedded provenance config is extracted.
inline ExperimentConfig config_from_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return parse_config(nlohmann::json::parse(text).at("provenance").at("config").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("--config", "JSON file without a provenance config");
    }
  }
  std::istringstream lines(text);
  std::string line, embedded;
  bool inside = false, found = false;
  while (std::getline(lines, line)) {
    if (line == "# config:") {
      inside = found = true;
      continue;
    }
    if (inside) {
      if (line.rfind("#   ", 0) == 0)
        embedded += line.substr(4) + "\n";
      else if (line == "#")
        embedded += "\n";
      else
        inside = false;
    }
  }
  return parse_config(found ? embedded : text);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str());
}

// ---------------------------------------------------------------------------
// Canonical emission
// ---------------------------------------------------------------------------

namespace detail {

inline void emit_sorted(YAML::Emitter& out, const YAML::Node& n) {
  if (n.IsMap()) {
    std::map<std::string, YAML::Node> sorted;
    for (const auto& kv : n) sorted.emplace(kv.first.as<std::string>(), kv.second);
    out << YAML::BeginMap;
    for (const auto& [k, v] : sorted) {
      out << YAML::Key << k << YAML::Value;
      emit_sorted(out, v);
    }
    out << YAML::EndMap;
  } else if (n.IsSequence()) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : n) emit_sorted(out, v);
    out << YAML::EndSeq;
  } else if (n.IsScalar()) {
    out << n.Scalar();
  } else {
    out << YAML::Null;
  }
}

inline std::string exact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Canonical YAML form: fixed key order, params sorted, doubles exact.
inline std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "command" << YAML::Value << c.command;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dim" << YAML::Value << c.domain.dim;
  out << YAML::Key << "sides" << YAML::Value << YAML::Flow << c.domain.sides;
  out << YAML::Key << "boundary" << YAML::Value << c.domain.boundary;
  out << YAML::EndMap;
  out << YAML::Key << "law" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << c.law.kind;
  out << YAML::Key << "c" << YAML::Value << detail::exact(c.law.c);
  out << YAML::Key << "p" << YAML::Value << detail::exact(c.law.p);
  out << YAML::Key << "distribution" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << c.law.distribution.kind;
  out << YAML::Key << "a" << YAML::Value << detail::exact(c.law.distribution.a);
  out << YAML::Key << "b" << YAML::Value << detail::exact(c.law.distribution.b);
  out << YAML::Key << "p" << YAML::Value << detail::exact(c.law.distribution.p);
  out << YAML::EndMap;
  out << YAML::Key << "trap" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "strength" << YAML::Value << detail::exact(c.law.trap_strength);
  out << YAML::Key << "access" << YAML::Value << YAML::Flow << c.law.trap_access;
  out << YAML::EndMap;
  out << YAML::EndMap;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "method" << YAML::Value << c.solver.method;
  out << YAML::Key << "tol" << YAML::Value << detail::exact(c.solver.tol);
  out << YAML::Key << "max_iterations" << YAML::Value << c.solver.max_iterations;
  out << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "path" << YAML::Value << YAML::DoubleQuoted << c.output.path;
  out << YAML::Key << "format" << YAML::Value << c.output.format;
  out << YAML::EndMap;
  out << YAML::Key << "params" << YAML::Value;
  if (c.params && c.params.IsMap() && c.params.size() > 0)
    detail::emit_sorted(out, c.params);
  else
    out << YAML::Flow << YAML::BeginMap << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_yaml(c))));
  return buf;
}

// ---------------------------------------------------------------------------
// Typed parameter access
// ---------------------------------------------------------------------------

template <class T>
T param(const ExperimentConfig& c, const std::string& key, const T& fallback) {
  if (!c.params || !c.params[key]) return fallback;
  return detail::read_as<T>(c.params[key], "params." + key);
}

inline bool has_param(const ExperimentConfig& c, const std::string& key) { return c.params && c.params[key]; }

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline Distribution make_distribution(const DistributionConfig& d) {
  try {
    if (d.kind == "constant") return Distribution::constant(d.a);
    if (d.kind == "uniform") return Distribution::uniform(d.a, d.b);
    if (d.kind == "log_uniform") return Distribution::log_uniform(d.a, d.b);
    if (d.kind == "two_point") return Distribution::two_point(d.a, d.p, d.b);
  } catch (const ParameterError& e) {
    throw ConfigError("law." + e.field(), e.what());
  }
  throw ConfigError("law.distribution.kind", "unknown distribution '" + d.kind + "'");
}

inline LatticePtr make_lattice(const ExperimentConfig& c) {
  BoundaryMode mode;
  try {
    mode = parse_boundary_mode(c.domain.boundary);
  } catch (const ParameterError&) {
    throw ConfigError("domain.boundary", "unknown boundary mode '" + c.domain.boundary + "'");
  }
  if (c.domain.dim < 1) throw ConfigError("domain.dim", "must be >= 1");
  if (static_cast<int>(c.domain.sides.size()) != c.domain.dim)
    throw ConfigError("domain.sides", "length must equal domain.dim");
  for (std::size_t i = 0; i < c.domain.sides.size(); ++i)
    if (c.domain.sides[i] < 2) throw ConfigError("domain.sides[" + std::to_string(i) + "]", "must be >= 2");
  return Lattice::make(c.domain.sides, mode);
}

inline EnvironmentLaw make_law(const ExperimentConfig& c) {
  const auto& l = c.law;
  try {
    if (l.kind == "constant") return EnvironmentLaw::constant(l.c);
    if (l.kind == "percolation") return EnvironmentLaw::percolation(l.p);
    if (l.kind == "iid") return EnvironmentLaw::iid(make_distribution(l.distribution));
    if (l.kind == "line_constant") return EnvironmentLaw::line_constant(make_distribution(l.distribution));
    if (l.kind == "trap") {
      Point access(l.trap_access.begin(), l.trap_access.end());
      return EnvironmentLaw::trap_law(TrapSpec{l.trap_strength, access}, make_distribution(l.distribution));
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.field().rfind("law.", 0) == 0 ? e.field() : "law." + e.field(), e.what());
  }
  throw ConfigError("law.kind", "unknown law '" + l.kind + "'");
}

inline SolverOptions make_solver(const ExperimentConfig& c) {
  SolverOptions opt;
  if (c.solver.method == "cg")
    opt.method = SolverMethod::conjugate_gradient;
  else if (c.solver.method == "relaxation")
    opt.method = SolverMethod::relaxation;
  else
    throw ConfigError("solver.method", "must be cg or relaxation");
  if (!(c.solver.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
  opt.tol = c.solver.tol;
  opt.max_iterations = c.solver.max_iterations;
  return opt;
}

/// Profile grammar: {kind: gaussian_bump | dipole | grid, s, cut, dir, values, dims, box_length}.
inline MacroscopicProfile make_profile(const YAML::Node& n, const std::string& path, const MacroscopicProfile& fallback) {
  if (!n) return fallback;
  detail::check_keys(n, path, {"kind", "s", "cut", "dir", "values", "dims", "box_length"});
  std::string kind = "gaussian_bump";
  double s = 0.5, cut = 6.0, box = 1.0;
  int dir = 0;
  detail::read_field(n, "kind", kind, path);
  detail::read_field(n, "s", s, path);
  detail::read_field(n, "cut", cut, path);
  detail::read_field(n, "dir", dir, path);
  detail::read_field(n, "box_length", box, path);
  try {
    if (kind == "gaussian_bump") return gaussian_bump(s, cut);
    if (kind == "dipole") return dipole(dir, s, cut);
    if (kind == "grid") {
      std::vector<double> values;
      std::vector<int> dims;
      detail::read_field(n, "values", values, path);
      detail::read_field(n, "dims", dims, path);
      return grid_profile(values, dims, box);
    }
  } catch (const ParameterError& e) {
    throw ConfigError(path + "." + e.field().substr(e.field().find('.') + 1), e.what());
  }
  throw ConfigError(path + ".kind", "unknown profile '" + kind + "'");
}

inline Point make_point(const ExperimentConfig& c, const std::string& key, const Lattice& lat, const Point& fallback) {
  if (!has_param(c, key)) return fallback;
  auto p = param<std::vector<long>>(c, key, {});
  if (static_cast<int>(p.size()) != lat.dim() || !lat.contains(p))
    throw ConfigError("params." + key, "point outside the lattice");
  return Point(p.begin(), p.end());
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Finding {
  std::string path;
  std::string message;
};

/// Schema and semantic checks; never throws.
inline std::vector<Finding> validate(const ExperimentConfig& c) {
  std::vector<Finding> out;
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      out.push_back({e.path(), e.what()});
    } catch (const Error& e) {
      out.push_back({"config", e.what()});
    }
  };
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), c.command) == names.end())
    out.push_back({"command", "unknown subcommand '" + c.command + "'"});
  guard([&] { make_lattice(c); });
  guard([&] { make_law(c); });
  guard([&] { make_solver(c); });
  if (c.output.format != "csv" && c.output.format != "json")
    out.push_back({"output.format", "must be csv or json"});
  if (c.params && c.params.IsMap())
    for (const char* key : {"t", "box_length"})
      guard([&] {
        if (has_param(c, key) && param<double>(c, key, 0.0) < 0.0)
          throw ConfigError(std::string("params.") + key, "must be nonnegative");
      });
  guard([&] {
    for (double e : param<std::vector<double>>(c, "eps", {}))
      if (!(e > 0.0)) throw ConfigError("params.eps", "entries must be positive");
  });
  if (c.command == "resolvent" && c.domain.dim <= 2) {
    for (const char* key : {"f", "g"})
      guard([&] {
        const std::string path = std::string("params.") + key;
        const auto prof = make_profile(c.params[key], path, dipole(0, 0.5));
        const double integral = profile_integral(prof, c.domain.dim, 256);
        if (std::abs(integral) > 1e-8)
          throw ConfigError(path, "resolvent profiles in d <= 2 must have zero integral "
                                  "(the integral of f and g over R^d must equal zero)");
      });
  }
  return out;
}

}  // namespace rcm
