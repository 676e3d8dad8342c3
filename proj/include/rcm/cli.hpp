#pragma once

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/cluster.hpp"
#include "rcm/config.hpp"
#include "rcm/corrector.hpp"
#include "rcm/env_io.hpp"
#include "rcm/gradfield.hpp"
#include "rcm/heatkernel.hpp"
#include "rcm/homogenize.hpp"
#include "rcm/parallel.hpp"
#include "rcm/walk.hpp"

namespace rcm::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { ok = 0, runtime_failure = 1, usage = 2 };

/// Output of one subcommand: scalar summary fields plus an optional table.
struct Result {
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline nlohmann::ordered_json versions() {
  nlohmann::ordered_json v;
  v["rcm"] = kVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = BOOST_LIB_VERSION;
  v["fftw"] = std::string(fftw_version);
  return v;
}

/// The experiment as recorded in outputs; the output location is not part of it.
inline ExperimentConfig recorded(ExperimentConfig c) {
  c.output.path = "-";
  return c;
}

inline nlohmann::ordered_json provenance(const ExperimentConfig& c) {
  const auto rc = recorded(c);
  nlohmann::ordered_json p;
  p["config_hash"] = config_hash(rc);
  p["seed"] = c.seed;
  p["versions"] = versions();
  p["config"] = to_yaml(rc);
  return p;
}

namespace detail {

inline std::string number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string scalar_text(const nlohmann::ordered_json& v) {
  if (v.is_number_float()) return number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline nlohmann::ordered_json json_number(double x) {
  if (std::isfinite(x)) return x;
  return number(x);
}

}  // namespace detail

inline std::string render(const ExperimentConfig& c, const Result& r) {
  std::ostringstream out;
  if (c.output.format == "json") {
    nlohmann::ordered_json j = r.summary;
    if (!r.columns.empty()) {
      j["columns"] = r.columns;
      auto rows = nlohmann::ordered_json::array();
      for (const auto& row : r.rows) {
        auto jr = nlohmann::ordered_json::array();
        for (double x : row) jr.push_back(detail::json_number(x));
        rows.push_back(std::move(jr));
      }
      j["rows"] = std::move(rows);
    }
    j["provenance"] = provenance(c);
    out << j.dump(2) << "\n";
    return out.str();
  }
  const auto prov = provenance(c);
  out << "# rcm " << kVersion << " " << c.command << "\n";
  out << "# config_hash: " << prov["config_hash"].get<std::string>() << "\n";
  out << "# seed: " << c.seed << "\n";
  out << "# versions:";
  for (const auto& [k, v] : prov["versions"].items()) out << " " << k << "=" << v.get<std::string>();
  out << "\n# config:\n";
  std::istringstream yaml(prov["config"].get<std::string>());
  for (std::string line; std::getline(yaml, line);) out << (line.empty() ? "#" : "#   " + line) << "\n";
  for (const auto& [k, v] : r.summary.items())
    if (!v.is_structured()) out << "# " << k << ": " << detail::scalar_text(v) << "\n";
  if (!r.columns.empty()) {
    for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "," : "") << r.columns[i];
    out << "\n";
    for (const auto& row : r.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::number(row[i]);
      out << "\n";
    }
  } else {
    bool first = true;
    for (const auto& [k, v] : r.summary.items())
      if (!v.is_structured()) {
        out << (first ? "" : ",") << k;
        first = false;
      }
    out << "\n";
    first = true;
    for (const auto& [k, v] : r.summary.items())
      if (!v.is_structured()) {
        out << (first ? "" : ",") << detail::scalar_text(v);
        first = false;
      }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

namespace detail {

inline Environment environment(const ExperimentConfig& c) { return build_environment(make_law(c), make_lattice(c), c.seed); }

inline std::vector<double> coords_of(const Lattice& lat, Vertex v) {
  std::vector<double> x;
  for (int i = 0; i < lat.dim(); ++i) x.push_back(static_cast<double>(lat.coord(v, i)));
  return x;
}

inline std::vector<std::string> coord_columns(int d, const std::string& prefix = "x") {
  std::vector<std::string> c;
  for (int i = 0; i < d; ++i) c.push_back(prefix + std::to_string(i));
  return c;
}

/// Centre if it carries conductance, otherwise the working-cluster vertex closest to it.
inline Vertex default_start(const Environment& env) {
  const Lattice& lat = env.lattice();
  const Vertex o = lat.origin();
  if (env.pi(o) > 0.0) return o;
  const auto cluster = default_working_cluster(label_clusters(env));
  if (cluster.empty()) throw PreconditionError("environment has no conducting edge");
  Vertex best = cluster.front();
  long best_d = std::numeric_limits<long>::max();
  for (Vertex v : cluster) {
    long d = 0;
    for (long x : lat.relative(v, o)) d += x * x;
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

inline Vertex start_vertex(const ExperimentConfig& c, const Environment& env, const std::string& key = "start") {
  if (!has_param(c, key)) return default_start(env);
  return env.lattice().index(make_point(c, key, env.lattice(), {}));
}

inline std::vector<double> eps_grid(const ExperimentConfig& c, std::vector<double> fallback) {
  auto e = param<std::vector<double>>(c, "eps", fallback);
  if (e.empty()) throw ConfigError("params.eps", "must not be empty");
  for (double x : e)
    if (!(x > 0.0)) throw ConfigError("params.eps", "entries must be positive");
  return e;
}

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  auto j = nlohmann::ordered_json::array();
  for (int i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(std::move(row));
  }
  return j;
}

/// Effective diffusion matrix: params.q if given, c I for the constant law,
/// otherwise the periodized corrector on a torus of side params.q_side.
inline Eigen::MatrixXd effective_q(const ExperimentConfig& c, int d, const SolverOptions& opt) {
  if (has_param(c, "q")) {
    const auto rows = param<std::vector<std::vector<double>>>(c, "q", {});
    Eigen::MatrixXd q(d, d);
    if (static_cast<int>(rows.size()) != d) throw ConfigError("params.q", "must be a d x d matrix");
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != d)
        throw ConfigError("params.q", "must be a d x d matrix");
      for (int k = 0; k < d; ++k) q(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return q;
  }
  const auto law = make_law(c);
  if (law.kind == EnvironmentLaw::Kind::constant) return law.c * Eigen::MatrixXd::Identity(d, d);
  const int side = param<int>(c, "q_side", d == 1 ? 4096 : (d == 2 ? 128 : 24));
  const auto env = build_environment(law, Lattice::cube(d, side, BoundaryMode::periodic), c.seed ^ 0x51ull);
  return diffusion_matrix(env, periodized_corrector(env, nullptr, opt)).q;
}

inline Result gen_env(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  Result r;
  r.summary["vertices"] = env.size();
  r.summary["edges"] = lat.edge_count();
  if (has_param(c, "binary")) {
    const auto path = param<std::string>(c, "binary", "");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path);
    write_binary(os, env);
    r.summary["binary"] = path;
  }
  r.columns = {"vertex", "dir"};
  for (const auto& s : coord_columns(lat.dim())) r.columns.push_back(s);
  r.columns.push_back("omega");
  lat.for_each_edge([&](Vertex v, int dir) {
    std::vector<double> row{static_cast<double>(v), static_cast<double>(dir)};
    for (double x : coords_of(lat, v)) row.push_back(x);
    row.push_back(env.forward(v, dir));
    r.rows.push_back(std::move(row));
  });
  return r;
}

inline Result walk(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  const Vertex x0 = start_vertex(c, env);
  const auto walks = param<std::size_t>(c, "walks", 100);
  const auto steps = param<std::size_t>(c, "steps", 100);
  const auto clock = param<std::string>(c, "clock", "discrete");
  const double t = param<double>(c, "time", static_cast<double>(steps));
  if (clock != "discrete" && clock != "csrw" && clock != "vsrw")
    throw ConfigError("params.clock", "must be discrete, csrw or vsrw");
  std::vector<std::vector<double>> rows(walks);
  parallel_for(walks, [&](std::size_t k) {
    WalkPath p;
    if (clock == "discrete")
      p = simulate_discrete(env, x0, steps, c.seed, k);
    else if (clock == "csrw")
      p = simulate_csrw(env, x0, t, c.seed, k);
    else
      p = simulate_vsrw(env, x0, t, c.seed, k);
    std::vector<double> row{static_cast<double>(k)};
    for (double x : displacement(p, lat.dim())) row.push_back(x);
    row.push_back(static_cast<double>(p.steps()));
    rows[k] = std::move(row);
  });
  Result r;
  double msd = 0.0;
  for (const auto& row : rows)
    for (int i = 0; i < lat.dim(); ++i) msd += row[static_cast<std::size_t>(i) + 1] * row[static_cast<std::size_t>(i) + 1];
  r.summary["start"] = coords_of(lat, x0);
  r.summary["clock"] = clock;
  r.summary["walks"] = walks;
  r.summary["mean_square_displacement"] = walks ? msd / static_cast<double>(walks) : 0.0;
  r.columns = {"walk_id"};
  for (const auto& s : coord_columns(lat.dim())) r.columns.push_back(s);
  r.columns.push_back("n");
  r.rows = std::move(rows);
  return r;
}

inline Result resistance(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  Point sink_default = lat.center();
  sink_default[0] = (sink_default[0] + 1) % lat.side(0);
  const Vertex src = lat.index(make_point(c, "source", lat, lat.center()));
  const Vertex snk = lat.index(make_point(c, "sink", lat, sink_default));
  const auto res = effective_resistance(env, src, snk, make_solver(c));
  Result r;
  r.summary["value"] = json_number(res.value);
  r.summary["residual"] = res.residual;
  r.summary["iterations"] = res.iterations;
  return r;
}

inline Result plate(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  const int dir = param<int>(c, "height_dir", lat.dim() - 1);
  if (dir < 0 || dir >= lat.dim()) throw ConfigError("params.height_dir", "outside 0..d-1");
  const long N = (lat.side(dir) - 1) / 2;
  const auto res = plate_potential(env, N, dir, make_solver(c));
  Result r;
  r.summary["value"] = res.f[lat.origin()];
  r.summary["residual"] = res.residual;
  r.summary["iterations"] = res.iterations;
  std::vector<double> sum(static_cast<std::size_t>(lat.side(dir)), 0.0), count(sum.size(), 0.0);
  for (Vertex v = 0; v < env.size(); ++v) {
    const auto h = static_cast<std::size_t>(lat.coord(v, dir));
    sum[h] += res.f[v];
    count[h] += 1.0;
  }
  r.columns = {"height", "mean_potential"};
  for (std::size_t h = 0; h < sum.size(); ++h)
    r.rows.push_back({static_cast<double>(static_cast<long>(h) - N), sum[h] / count[h]});
  return r;
}

inline Result boxcond(const ExperimentConfig& c) {
  const auto env = environment(c);
  const long N = (env.lattice().side(0) - 1) / 2;
  const auto res = box_conductance(env, N, make_solver(c));
  Result r;
  r.summary["value"] = res.value;
  r.summary["residual"] = res.residual;
  r.summary["iterations"] = res.iterations;
  return r;
}

inline Result embed(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  const auto mask = vertex_mask(env.size(), default_working_cluster(label_clusters(env)));
  const auto psi = harmonic_embedding(env, &mask, make_solver(c));
  Result r;
  r.columns = {"vertex"};
  for (const auto& s : coord_columns(lat.dim())) r.columns.push_back(s);
  for (const auto& s : coord_columns(lat.dim(), "psi")) r.columns.push_back(s);
  for (Vertex v = 0; v < env.size(); ++v) {
    if (!mask[v]) continue;
    std::vector<double> row{static_cast<double>(v)};
    for (long x : lat.relative(v, lat.origin())) row.push_back(static_cast<double>(x));
    for (const auto& p : psi) row.push_back(p[v]);
    r.rows.push_back(std::move(row));
  }
  r.summary["cluster_size"] = r.rows.size();
  return r;
}

inline Result corrector(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  const auto chi = periodized_corrector(env, nullptr, make_solver(c));
  Result r;
  r.columns = {"vertex"};
  for (const auto& s : coord_columns(lat.dim())) r.columns.push_back(s);
  for (const auto& s : coord_columns(lat.dim(), "chi")) r.columns.push_back(s);
  double maxabs = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) {
    if (std::isnan(chi[0][v])) continue;
    std::vector<double> row{static_cast<double>(v)};
    for (double x : coords_of(lat, v)) row.push_back(x);
    for (const auto& ch : chi) {
      row.push_back(ch[v]);
      maxabs = std::max(maxabs, std::abs(ch[v]));
    }
    r.rows.push_back(std::move(row));
  }
  r.summary["max_abs_corrector"] = maxabs;
  return r;
}

inline Result diffmat(const ExperimentConfig& c) {
  const auto env = environment(c);
  const auto chi = periodized_corrector(env, nullptr, make_solver(c));
  const auto dm = diffusion_matrix(env, chi);
  Result r;
  r.summary["q"] = matrix_json(dm.q);
  r.summary["vsrw_covariance_per_time"] = matrix_json(dm.vsrw_covariance());
  r.summary["discrete_covariance_per_step"] = matrix_json(dm.discrete_covariance());
  r.summary["mean_pi"] = dm.mean_pi;
  r.summary["min_eigenvalue"] = dm.min_eigenvalue();
  nlohmann::ordered_json cal;
  cal["vsrw_factor"] = dm.vsrw_factor;
  cal["vsrw"] = "Cov(Y_t) / t -> vsrw_factor * q";
  cal["discrete"] = "Cov(X_n) / n -> vsrw_factor * q / E[pi]";
  cal["generator"] = "div(q grad)";
  r.summary["calibration"] = cal;
  r.summary["nondegeneracy_lower_bound"] = nondegeneracy_lower_bound(env);
  r.columns = {"i", "j", "q", "vsrw_covariance", "discrete_covariance"};
  for (int i = 0; i < dm.q.rows(); ++i)
    for (int k = 0; k < dm.q.cols(); ++k)
      r.rows.push_back({static_cast<double>(i), static_cast<double>(k), dm.q(i, k), dm.vsrw_covariance()(i, k),
                        dm.discrete_covariance()(i, k)});
  return r;
}

inline Result heatkernel(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Vertex x0 = start_vertex(c, env);
  const auto n_max = param<std::size_t>(c, "n_max", 200);
  const auto series = return_probability_series(env, x0, n_max);
  const double lo = param<double>(c, "fit_lo", static_cast<double>(n_max / 2));
  const double hi = param<double>(c, "fit_hi", static_cast<double>(n_max));
  const auto fit = series.fit(lo, hi);
  Result r;
  r.summary["fit_slope"] = fit.slope;
  r.summary["fit_lo"] = lo;
  r.summary["fit_hi"] = hi;
  r.columns = {"n", "p2n", "fitted_slope"};
  for (std::size_t k = 0; k < series.n.size(); ++k) r.rows.push_back({series.n[k], series.p[k], fit.slope});
  return r;
}

inline Result isoperimetry(const ExperimentConfig& c) {
  const auto env = environment(c);
  IsoperimetryOptions opt;
  opt.cutoff = param<std::size_t>(c, "cutoff", opt.cutoff);
  opt.allow_fallback = param<bool>(c, "allow_fallback", false);
  opt.connected_only = param<bool>(c, "connected_only", true);
  const auto prof = isoperimetric_profile(env, opt);
  Result r;
  r.summary["exact"] = prof.exact;
  r.summary["coverage"] = json_number(prof.coverage);
  if (has_param(c, "gamma")) {
    const double gamma = param<double>(c, "gamma", 0.25);
    const double eps = param<double>(c, "eps_mix", 0.1);
    double pi_min = std::numeric_limits<double>::infinity();
    for (Vertex v = 0; v < env.size(); ++v)
      if (env.pi(v) > 0.0) pi_min = std::min(pi_min, env.pi(v));
    r.summary["gamma"] = gamma;
    r.summary["eps_mix"] = eps;
    r.summary["threshold"] = json_number(morris_peres_threshold(lazify(prof, gamma), gamma, eps, pi_min));
  }
  r.columns = {"volume", "phi"};
  for (std::size_t k = 0; k < prof.volumes.size(); ++k) r.rows.push_back({prof.volumes[k], prof.phi[k]});
  return r;
}

inline Result trap(const ExperimentConfig& c) {
  const auto lat = make_lattice(c);
  if (lat->dim() < 2) throw ConfigError("domain.dim", "trap needs d >= 2");
  auto law = make_law(c);
  double strength = param<double>(c, "strength", 0.1);
  Point access = lat->center();
  access[1] += 2;
  if (law.kind == EnvironmentLaw::Kind::trap) {
    strength = law.trap.strength;
    if (!law.trap.access.empty()) access = law.trap.access;
    law = EnvironmentLaw::iid(law.dist);
  }
  access = make_point(c, "access", *lat, access);
  const auto [env, geom] = build_trap_environment(lat, strength, access, law, c.seed);
  const auto ns = param<std::vector<std::size_t>>(c, "ns", {10, 20, 40, 80});
  const auto rows = trap_decay_experiment(env, geom, ns, param<bool>(c, "control", true));
  Result r;
  r.summary["strength"] = strength;
  r.summary["access"] = std::vector<long>(access.begin(), access.end());
  r.columns = {"n", "measured", "lower_bound", "path_cost", "entry", "confinement", "exit", "control"};
  for (const auto& t : rows)
    r.rows.push_back({static_cast<double>(t.n), t.measured, t.lower_bound, t.path_cost, t.entry, t.confinement,
                      t.exit, t.control});
  return r;
}

inline FieldGauge field_gauge(const ExperimentConfig& c, const Lattice& lat, const GradientField* current) {
  const auto kind = param<std::string>(c, "gauge", lat.periodic() ? "zero_mean" : "dirichlet");
  if (kind == "zero_mean") return FieldGauge::zero_mean();
  if (kind == "pinned") return FieldGauge::pinned(lat.index(make_point(c, "pin", lat, lat.center())));
  if (kind == "dirichlet") {
    VertexMask b(lat.size(), 0);
    for (Vertex v = 0; v < lat.size(); ++v) b[v] = lat.on_outer_face(v);
    return FieldGauge::dirichlet(std::move(b), current ? current->height : ScalarField(lat.size(), 0.0));
  }
  throw ConfigError("params.gauge", "must be zero_mean, pinned or dirichlet");
}

inline Result gradfield(const ExperimentConfig& c) {
  const auto env = environment(c);
  const Lattice& lat = env.lattice();
  GradientField field;
  Result r;
  if (has_param(c, "atoms")) {
    MixtureSpec spec;
    try {
      spec = MixtureSpec::make(param<std::vector<double>>(c, "atoms", {}), param<std::vector<double>>(c, "weights", {}));
    } catch (const ParameterError& e) {
      throw ConfigError("params." + e.field().substr(e.field().find('.') + 1), e.what());
    }
    const auto sweeps = param<std::size_t>(c, "sweeps", 10);
    GibbsState s{env, GradientField{env.lattice_ptr(), ScalarField(env.size(), 0.0), field_gauge(c, lat, nullptr)}};
    for (std::size_t k = 0; k < sweeps; ++k) gibbs_sweep(s, spec, c.seed, k);
    field = s.phi;
    r.summary["sweeps"] = sweeps;
  } else {
    field = sample_gaussian_field(env, c.seed, field_gauge(c, lat, nullptr));
  }
  r.columns = {"vertex"};
  for (const auto& s : coord_columns(lat.dim())) r.columns.push_back(s);
  r.columns.push_back("height");
  double sum2 = 0.0;
  for (Vertex v = 0; v < env.size(); ++v) {
    std::vector<double> row{static_cast<double>(v)};
    for (double x : coords_of(lat, v)) row.push_back(x);
    row.push_back(field.height[v]);
    sum2 += field.height[v] * field.height[v];
    r.rows.push_back(std::move(row));
  }
  r.summary["mean_square_height"] = sum2 / static_cast<double>(env.size());
  return r;
}

inline Result gff_scaling(const ExperimentConfig& c) {
  const int d = c.domain.dim;
  const auto opt = make_solver(c);
  const auto law = make_law(c);
  const auto f = make_profile(c.params["f"], "params.f", dipole(0, 0.5, 6.0));
  const double box = param<double>(c, "box_length", 4.0 * f.fn.support);
  const auto eps = eps_grid(c, {1.0 / 8, 1.0 / 16, 1.0 / 32});
  const auto samples = param<std::size_t>(c, "samples", 4);
  const int grid = param<int>(c, "grid", 128);
  const auto q = effective_q(c, d, opt);
  const double target = gff_variance_target(f.fn, q, grid, box);
  Result r;
  r.summary["target"] = target;
  r.summary["q"] = matrix_json(q);
  r.columns = {"eps", "side", "variance", "standard_error", "target", "relative_error"};
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const int side = static_cast<int>(std::lround(box / eps[e]));
    const auto lat = Lattice::cube(d, side, BoundaryMode::periodic);
    const auto w = phi_epsilon_weights(*lat, f.fn, eps[e]);
    std::vector<double> v(samples);
    parallel_for(samples, [&](std::size_t s) {
      const auto env = build_environment(law, lat, c.seed + 7919 * e + 104729 * s);
      v[s] = phi_epsilon_variance(env, w, opt);
    });
    const double m = stats::mean(v);
    r.rows.push_back({eps[e], static_cast<double>(side), m, samples > 1 ? stats::standard_error(v) : 0.0, target,
                      std::abs(m - target) / std::abs(target)});
  }
  return r;
}

inline Result homogenize(const ExperimentConfig& c) {
  const int d = c.domain.dim;
  const auto opt = make_solver(c);
  const auto f = make_profile(c.params["f"], "params.f", gaussian_bump(0.5, 4.0));
  const double box = param<double>(c, "box_length", 4.0 * f.fn.support);
  const double t = param<double>(c, "t", 0.25);
  const auto eps = eps_grid(c, {1.0 / 8, 1.0 / 16, 1.0 / 32});
  const auto samples = param<std::size_t>(c, "samples", 4);
  const auto q = effective_q(c, d, opt);
  const auto rows = homogenization_error(make_law(c), d, q, f, t, eps, box, samples, c.seed);
  Result r;
  r.summary["t"] = t;
  r.summary["box_length"] = box;
  r.summary["q"] = matrix_json(q);
  r.columns = {"eps", "side", "l2_error", "standard_error_sq", "samples"};
  for (const auto& row : rows)
    r.rows.push_back({row.eps, std::round(box / row.eps), row.error, row.standard_error,
                      static_cast<double>(row.samples)});
  return r;
}

inline Result resolvent(const ExperimentConfig& c) {
  const int d = c.domain.dim;
  const auto opt = make_solver(c);
  const auto law = make_law(c);
  const auto f = make_profile(c.params["f"], "params.f", dipole(0, 0.5, 6.0));
  const auto g = make_profile(c.params["g"], "params.g", dipole(0, 0.5, 6.0));
  if (d <= 2)
    for (const auto* p : {&f, &g})
      if (std::abs(profile_integral(*p, d, 256)) > 1e-8)
        throw ConfigError(p == &f ? "params.f" : "params.g", "resolvent profiles in d <= 2 must have zero integral");
  const double box = param<double>(c, "box_length", 4.0 * std::max(f.fn.support, g.fn.support));
  const auto eps = eps_grid(c, {1.0 / 8, 1.0 / 16, 1.0 / 32});
  const auto samples = param<std::size_t>(c, "samples", 1);
  const int grid = param<int>(c, "grid", 128);
  const auto q = effective_q(c, d, opt);
  const double target = resolvent_target(f, g, q, grid, box);
  Result r;
  r.summary["target"] = target;
  r.summary["q"] = matrix_json(q);
  r.columns = {"eps", "side", "pairing", "standard_error", "target"};
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const int side = static_cast<int>(std::lround(box / eps[e]));
    const auto lat = Lattice::cube(d, side, BoundaryMode::periodic);
    std::vector<double> v(samples);
    parallel_for(samples, [&](std::size_t s) {
      const auto env = build_environment(law, lat, c.seed + 7919 * e + 104729 * s);
      v[s] = resolvent_pairing(env, f, g, eps[e], opt);
    });
    r.rows.push_back({eps[e], static_cast<double>(side), stats::mean(v),
                      samples > 1 ? stats::standard_error(v) : 0.0, target});
  }
  return r;
}

}  // namespace detail

inline Result execute(const ExperimentConfig& c) {
  static const std::map<std::string, std::function<Result(const ExperimentConfig&)>> table{
      {"gen-env", detail::gen_env},       {"walk", detail::walk},
      {"resistance", detail::resistance}, {"plate", detail::plate},
      {"boxcond", detail::boxcond},       {"embed", detail::embed},
      {"corrector", detail::corrector},   {"diffmat", detail::diffmat},
      {"heatkernel", detail::heatkernel}, {"isoperimetry", detail::isoperimetry},
      {"trap", detail::trap},             {"gradfield", detail::gradfield},
      {"gff-scaling", detail::gff_scaling}, {"homogenize", detail::homogenize},
      {"resolvent", detail::resolvent}};
  const auto it = table.find(c.command);
  if (it == table.end()) throw ConfigError("command", "unknown subcommand '" + c.command + "'");
  return it->second(c);
}

/// Validates, runs and writes the output. Returns the process exit code.
inline int run(const ExperimentConfig& c, std::ostream& err = std::cerr) {
  const auto findings = validate(c);
  if (!findings.empty()) {
    for (const auto& f : findings) err << "config error: " << f.message << "\n";
    return usage;
  }
  std::string text;
  try {
    text = render(c, execute(c));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return runtime_failure;
  }
  if (c.output.path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    std::ofstream os(c.output.path, std::ios::binary);
    if (!os || !(os << text)) {
      err << "error: cannot write " << c.output.path << "\n";
      return runtime_failure;
    }
  }
  return ok;
}

}  // namespace rcm::cli
