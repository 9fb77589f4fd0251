#ifndef QUDIT_FTQEC_CONFIG_HPP
#define QUDIT_FTQEC_CONFIG_HPP

#include "two_qubit.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace qftqec {

using json = nlohmann::json;

struct ConfigError : Error {
  using Error::Error;
};

// Everything a run needs beyond the sweep grid.
struct RunConfig {
  ModelConfig model;
  ProtocolOptions protocol;
  double baseline_rabi_ratio = 1.0;
  SwitchConfig sw;
  json source;  // canonical form, used for cache keys
};

namespace detail {

inline void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

inline std::vector<Coupling> parse_couplings(const json& j, const char* name) {
  std::vector<Coupling> out;
  if (!j.is_array()) throw ConfigError(std::string(name) + ": expected a list of [i, j, value]");
  for (const auto& c : j) {
    if (c.is_array() && c.size() == 3)
      out.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<double>()});
    else if (c.is_object())
      out.push_back({c.at("i").get<int>(), c.at("j").get<int>(), c.at("value").get<double>()});
    else
      throw ConfigError(std::string(name) + ": coupling entries are [i, j, value] or {i, j, value}");
  }
  return out;
}

inline MatR parse_matrix(const json& j, int n, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError(std::string(name) + ": expected " + std::to_string(n) + " rows");
  MatR m(n, n);
  for (int r = 0; r < n; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != n) throw ConfigError(std::string(name) + ": ragged row");
    for (int c = 0; c < n; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline SpinTopology parse_topology(const json& j) {
  SpinTopology t;
  if (!j.contains("sites")) throw ConfigError("missing 'sites'");
  for (const auto& s : j.at("sites")) t.spins.push_back(s.is_object() ? s.at("s").get<double>() : s.get<double>());
  if (j.contains("J")) t.J = detail::parse_couplings(j.at("J"), "J");
  if (j.contains("D")) t.D = detail::parse_couplings(j.at("D"), "D");
  if (j.contains("g")) {
    if (j.at("g").is_number())
      t.g.assign(t.spins.size(), j.at("g").get<double>());
    else
      t.g = j.at("g").get<std::vector<double>>();
  } else {
    t.g.assign(t.spins.size(), 2.0);
  }
  t.B = detail::get_or(j, "B", 0.0);
  t.bohr_magneton = detail::get_or(j, "bohr_magneton_GHz_per_T", t.bohr_magneton);
  t.dim_cap = detail::get_or<std::size_t>(j, "dim_cap", t.dim_cap);
  try {
    t.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return t;
}

inline IntegratorConfig parse_integrator(const json& j) {
  IntegratorConfig c;
  detail::check_keys(j, "integrator", {"scheme", "dt_cap", "n_max", "taylor_step", "max_terms", "blocked", "tolerances"});
  std::string scheme = detail::get_or<std::string>(j, "scheme", "taylor");
  if (scheme == "taylor")
    c.scheme = Scheme::taylor;
  else if (scheme == "rk4")
    c.scheme = Scheme::rk4;
  else
    throw ConfigError("integrator.scheme must be 'taylor' or 'rk4'");
  c.dt_cap = detail::get_or(j, "dt_cap", c.dt_cap);
  c.n_max = detail::get_or(j, "n_max", c.n_max);
  c.taylor_step = detail::get_or(j, "taylor_step", c.taylor_step);
  c.taylor_max_terms = detail::get_or(j, "max_terms", c.taylor_max_terms);
  c.blocked = detail::get_or(j, "blocked", c.blocked);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::check_keys(t, "integrator.tolerances", {"taylor", "trace", "positivity", "positivity_abs", "positivity_max_dim"});
    c.taylor_tol = detail::get_or(t, "taylor", c.taylor_tol);
    c.trace_tol = detail::get_or(t, "trace", c.trace_tol);
    c.positivity_tol = detail::get_or(t, "positivity", c.positivity_tol);
    c.positivity_abs = detail::get_or(t, "positivity_abs", c.positivity_abs);
    c.positivity_max_dim = detail::get_or(t, "positivity_max_dim", c.positivity_max_dim);
  }
  if (!(c.dt_cap > 0) || c.n_max < 1 || !(c.taylor_step > 0)) throw ConfigError("integrator: step controls must be positive");
  return c;
}

inline MeasurementModel parse_measurement(const json& j) {
  MeasurementModel m;
  detail::check_keys(j, "measurement", {"p_m", "n_rep"});
  m.p_m = detail::get_or(j, "p_m", 0.0);
  m.n_rep = detail::get_or(j, "n_rep", 1);
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return m;
}

inline RunConfig parse_run_config(const json& j) {
  detail::check_keys(j, "config", {"name", "sites", "J", "D", "g", "B", "bohr_magneton_GHz_per_T", "dim_cap", "qudit",
                                   "dephasing", "kraus", "code", "drive", "integrator", "protocol", "measurement",
                                   "baseline", "switch"});
  RunConfig rc;
  rc.source = j;
  auto& m = rc.model;
  m.topology = parse_topology(j);
  const int n = m.topology.sites();

  if (j.contains("qudit")) {
    const auto& q = j.at("qudit");
    detail::check_keys(q, "qudit", {"gap_check", "gap_fraction"});
    m.basis.gap_check = detail::get_or(q, "gap_check", m.basis.gap_check);
    m.basis.gap_fraction = detail::get_or(q, "gap_fraction", m.basis.gap_fraction);
  }

  json dep = j.value("dephasing", json::object());
  detail::check_keys(dep, "dephasing", {"C_mode", "C", "c", "t2_ref_us"});
  std::string mode = detail::get_or<std::string>(dep, "C_mode", "uniform");
  if (mode == "uniform") {
    m.C = MatR::Identity(n, n) * detail::get_or(dep, "c", 1.0);
  } else if (mode == "matrix") {
    if (!dep.contains("C")) throw ConfigError("dephasing: C_mode 'matrix' needs 'C'");
    m.C = detail::parse_matrix(dep.at("C"), n, "dephasing.C");
    if ((m.C - m.C.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("dephasing.C must be symmetric");
  } else {
    throw ConfigError("dephasing.C_mode must be 'uniform' or 'matrix'");
  }
  m.t2_ref = detail::get_or(dep, "t2_ref_us", 1.0) * 1e-6;
  if (!(m.t2_ref > 0)) throw ConfigError("dephasing.t2_ref_us must be positive");

  if (j.contains("kraus")) {
    const auto& k = j.at("kraus");
    detail::check_keys(k, "kraus", {"cutoff", "snapshot_ns"});
    m.kraus.cutoff = detail::get_or(k, "cutoff", m.kraus.cutoff);
    m.snapshot = detail::get_or(k, "snapshot_ns", 0.0) * 1e-9;
  }
  if (j.contains("code")) {
    const auto& c = j.at("code");
    detail::check_keys(c, "code", {"threshold", "norm_weight"});
    m.synthesis.threshold = detail::get_or(c, "threshold", m.synthesis.threshold);
    m.synthesis.norm_weight = detail::get_or(c, "norm_weight", m.synthesis.norm_weight);
  }
  if (j.contains("drive")) {
    const auto& d = j.at("drive");
    detail::check_keys(d, "drive", {"tau_ref_ns", "calib_theta", "calib_phi", "rabi_max"});
    m.tau_ref = detail::get_or(d, "tau_ref_ns", 90.0) * 1e-9;
    m.calib_theta = detail::get_or(d, "calib_theta", m.calib_theta);
    m.calib_phi = detail::get_or(d, "calib_phi", m.calib_phi);
    m.rabi_max = detail::get_or(d, "rabi_max", 0.0);
    if (!(m.tau_ref > 0)) throw ConfigError("drive.tau_ref_ns must be positive");
  }

  auto& p = rc.protocol;
  if (j.contains("integrator")) p.integrator = parse_integrator(j.at("integrator"));
  if (j.contains("measurement")) p.measurement = parse_measurement(j.at("measurement"));
  if (j.contains("protocol")) {
    const auto& q = j.at("protocol");
    detail::check_keys(q, "protocol", {"t2_anc_us", "readout", "noisy_prep", "prune", "acceptance_floor"});
    p.t2_anc = detail::get_or(q, "t2_anc_us", 0.0) * 1e-6;
    std::string r = detail::get_or<std::string>(q, "readout", "summed");
    if (r == "summed")
      p.readout = ProtocolOptions::Readout::summed;
    else if (r == "block")
      p.readout = ProtocolOptions::Readout::block;
    else
      throw ConfigError("protocol.readout must be 'summed' or 'block'");
    p.noisy_prep = detail::get_or(q, "noisy_prep", p.noisy_prep);
    p.prune = detail::get_or(q, "prune", p.prune);
    p.acceptance_floor = detail::get_or(q, "acceptance_floor", p.acceptance_floor);
  }
  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    detail::check_keys(b, "baseline", {"rabi_ratio"});
    rc.baseline_rabi_ratio = detail::get_or(b, "rabi_ratio", 1.0);
    if (!(rc.baseline_rabi_ratio > 0)) throw ConfigError("baseline.rabi_ratio must be positive");
  }
  if (j.contains("switch")) {
    const auto& s = j.at("switch");
    detail::check_keys(s, "switch", {"unit_d", "lambda_GHz", "phi", "rabi_ratio_baseline", "resolve_factor", "max_loops", "max_windings"});
    auto& w = rc.sw;
    w.unit_d = detail::get_or(s, "unit_d", w.unit_d);
    w.lambda_GHz = detail::get_or(s, "lambda_GHz", w.lambda_GHz);
    w.phi = detail::get_or(s, "phi", w.phi);
    w.rabi_ratio_baseline = detail::get_or(s, "rabi_ratio_baseline", w.rabi_ratio_baseline);
    w.resolve_factor = detail::get_or(s, "resolve_factor", w.resolve_factor);
    w.max_loops = detail::get_or(s, "max_loops", w.max_loops);
    w.max_windings = detail::get_or(s, "max_windings", w.max_windings);
    if (w.unit_d != 4 && w.unit_d != 6) throw ConfigError("switch.unit_d must be 4 or 6");
    if (!(w.lambda_GHz > 0)) throw ConfigError("switch.lambda_GHz must be positive");
  }
  return rc;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_json_file(path)); }

// overlay b onto a (objects merged recursively)
inline json merge_json(json a, const json& b) {
  a.merge_patch(b);
  return a;
}

// ---------------------------------------------------------------- serialization

inline json to_json(const CodeWords& cw) {
  return {{"support0", cw.support0},
          {"support1", cw.support1},
          {"amp0", std::vector<double>(cw.amp0.data(), cw.amp0.data() + cw.amp0.size())},
          {"amp1", std::vector<double>(cw.amp1.data(), cw.amp1.data() + cw.amp1.size())},
          {"K", cw.K},
          {"kl_residual", cw.kl_residual},
          {"partitions_scanned", cw.partitions_scanned}};
}

inline CodeWords codewords_from_json(const json& j) {
  CodeWords cw;
  cw.support0 = j.at("support0").get<std::vector<int>>();
  cw.support1 = j.at("support1").get<std::vector<int>>();
  auto a0 = j.at("amp0").get<std::vector<double>>(), a1 = j.at("amp1").get<std::vector<double>>();
  cw.amp0 = Eigen::Map<VecR>(a0.data(), static_cast<Eigen::Index>(a0.size()));
  cw.amp1 = Eigen::Map<VecR>(a1.data(), static_cast<Eigen::Index>(a1.size()));
  cw.K = j.at("K").get<int>();
  cw.kl_residual = j.at("kl_residual").get<double>();
  cw.partitions_scanned = j.value("partitions_scanned", std::size_t{0});
  return cw;
}

inline json complex_matrix_json(const MatC& m) {
  json re = json::array(), im = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json a = json::array(), b = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      a.push_back(m(r, c).real());
      b.push_back(m(r, c).imag());
    }
    re.push_back(a);
    im.push_back(b);
  }
  return {{"re", re}, {"im", im}};
}

inline json real_matrix_json(const MatR& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json a = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
    out.push_back(a);
  }
  return out;
}

inline json to_json(const ErrorBasis& eb) { return {{"K", eb.K}, {"vectors", complex_matrix_json(eb.vectors)}}; }

inline json to_json(const PulseSchedule& ps) {
  json pulses = json::array();
  for (const auto& p : ps.pulses)
    pulses.push_back({{"pair", {p.m, p.n}}, {"area", p.theta}, {"phase", p.phi}, {"omega_rad_s", p.omega}});
  return {{"pulses", pulses},
          {"tau_s", ps.tau},
          {"rabi_max_rad_s", ps.rabi_max},
          {"min_gap_difference_rad_s", ps.min_gap_difference},
          {"distinguishable", ps.distinguishable}};
}

}  // namespace qftqec

#endif
