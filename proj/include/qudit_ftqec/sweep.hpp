#ifndef QUDIT_FTQEC_SWEEP_HPP
#define QUDIT_FTQEC_SWEEP_HPP

#include "config.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace qftqec {

enum class Circuit { single_gate_cycle, baseline, two_qubit_cycle, two_qubit_baseline };

inline const char* circuit_tag(Circuit c) {
  switch (c) {
    case Circuit::single_gate_cycle: return "cycle";
    case Circuit::baseline: return "baseline";
    case Circuit::two_qubit_cycle: return "cphase";
    case Circuit::two_qubit_baseline: return "cphase_baseline";
  }
  return "?";
}

inline Circuit parse_circuit(const std::string& s) {
  if (s == "single_gate_cycle" || s == "cycle") return Circuit::single_gate_cycle;
  if (s == "baseline") return Circuit::baseline;
  if (s == "two_qubit_cycle" || s == "cphase") return Circuit::two_qubit_cycle;
  if (s == "two_qubit_baseline" || s == "cphase_baseline") return Circuit::two_qubit_baseline;
  throw ConfigError("unknown circuit '" + s + "'");
}

inline std::vector<std::pair<double, double>> paper_gate_set() {
  return {{pi / 4, pi}, {pi / 2, pi}, {pi / 2, -pi / 2}, {pi / 2, -pi / 4}, {pi / 2, -pi / 8}};
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0) || !(hi >= lo)) throw ConfigError("log grid needs 0 < min <= max and points >= 1");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

struct SweepPlan {
  RunConfig run;
  std::vector<int> d_list;
  std::vector<double> t2;  // s, ascending
  std::vector<std::pair<double, double>> gates;
  std::vector<Circuit> circuits;
};

inline std::filesystem::path default_model_path() {
#ifdef QUDIT_FTQEC_DATA_DIR
  return std::filesystem::path(QUDIT_FTQEC_DATA_DIR) / "ni7_default.json";
#else
  return "data/ni7_default.json";
#endif
}

inline SweepPlan parse_plan(const json& j, const std::filesystem::path& base_dir = ".") {
  detail::check_keys(j, "plan", {"name", "model", "overrides", "d_list", "t2_us", "t2_grid", "inv_t2_grid", "gates",
                                 "circuit", "circuits", "measurement"});
  SweepPlan p;
  json model;
  if (!j.contains("model")) {
    model = read_json_file(default_model_path());
  } else if (j.at("model").is_string()) {
    std::filesystem::path mp = j.at("model").get<std::string>();
    if (mp.is_relative()) {
      auto local = base_dir / mp;
      mp = std::filesystem::exists(local) ? local : default_model_path().parent_path() / mp;
    }
    model = read_json_file(mp);
  } else {
    model = j.at("model");
  }
  if (j.contains("overrides")) model = merge_json(model, j.at("overrides"));
  if (j.contains("measurement")) model["measurement"] = j.at("measurement");
  p.run = parse_run_config(model);

  p.d_list = detail::get_or<std::vector<int>>(j, "d_list", {});
  for (int d : p.d_list)
    if (d < 4 || d % 2) throw ConfigError("d_list entries must be even and >= 4");

  if (j.contains("t2_us")) {
    for (double t : j.at("t2_us").get<std::vector<double>>()) p.t2.push_back(t * 1e-6);
  } else if (j.contains("t2_grid")) {
    const auto& g = j.at("t2_grid");
    p.t2 = log_grid(g.at("min_us").get<double>() * 1e-6, g.at("max_us").get<double>() * 1e-6, g.at("points").get<int>());
  } else if (j.contains("inv_t2_grid")) {
    const auto& g = j.at("inv_t2_grid");
    for (double r : log_grid(g.at("min").get<double>(), g.at("max").get<double>(), g.at("points").get<int>()))
      p.t2.push_back(1.0 / r);
  }
  if (p.t2.empty()) throw ConfigError("plan needs a non-empty T2 grid (t2_us, t2_grid or inv_t2_grid)");
  for (double t : p.t2)
    if (!(t > 0)) throw ConfigError("T2 values must be positive");
  std::sort(p.t2.begin(), p.t2.end());

  if (!j.contains("gates") || (j.at("gates").is_string() && j.at("gates").get<std::string>() == "paper")) {
    p.gates = paper_gate_set();
  } else {
    for (const auto& g : j.at("gates")) {
      if (!g.is_array() || g.size() != 2) throw ConfigError("gates entries are [theta, phi]");
      double th = g[0].get<double>();
      if (th < 0 || th >= 4 * pi) throw ConfigError("gate theta must lie in [0, 4 pi)");
      p.gates.emplace_back(th, g[1].get<double>());
    }
  }
  if (p.gates.empty()) throw ConfigError("gate set is empty");

  if (j.contains("circuits"))
    for (const auto& c : j.at("circuits")) p.circuits.push_back(parse_circuit(c.get<std::string>()));
  else
    p.circuits.push_back(parse_circuit(detail::get_or<std::string>(j, "circuit", "single_gate_cycle")));
  bool needs_d = false;
  for (Circuit c : p.circuits) needs_d = needs_d || c == Circuit::single_gate_cycle || c == Circuit::two_qubit_cycle;
  if (needs_d && p.d_list.empty()) throw ConfigError("d_list is empty");
  for (Circuit c : p.circuits)
    if (c == Circuit::two_qubit_cycle)
      for (int d : p.d_list)
        if (d != 4 && d != 6) throw ConfigError("two-qubit circuits support d = 4 or 6 only");
  return p;
}

inline SweepPlan load_plan(const std::filesystem::path& path) {
  return parse_plan(read_json_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

// ---------------------------------------------------------------- rows and CSV

struct Row {
  int d = 0;
  double t2_us = 0, theta = 0, phi = 0;
  std::string circuit;
  double E_e = 0, F_e = 0, leakage = 0, acceptance = 1;
  std::vector<double> syndromes;
  std::string error;

  bool ok() const { return error.empty(); }
};

inline const char* csv_header() { return "d,t2_us,theta,phi,circuit,E_e,F_e,leakage,acceptance,syndromes"; }

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("bad number in CSV: '" + s + "'");
  return v;
}

inline std::string csv_line(const Row& r) {
  std::string out = std::to_string(r.d) + "," + fmt_double(r.t2_us) + "," + fmt_double(r.theta) + "," +
                    fmt_double(r.phi) + "," + r.circuit + ",";
  if (!r.ok()) {
    std::string msg = r.error;
    for (char& c : msg)
      if (c == ',' || c == '\n' || c == '\r' || c == ';') c = ' ';
    return out + "nan,nan,nan,nan,error:" + msg;
  }
  out += fmt_double(r.E_e) + "," + fmt_double(r.F_e) + "," + fmt_double(r.leakage) + "," + fmt_double(r.acceptance) + ",";
  for (std::size_t i = 0; i < r.syndromes.size(); ++i) out += (i ? ";" : "") + fmt_double(r.syndromes[i]);
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<Row>& rows) {
  os << csv_header() << "\n";
  for (const auto& r : rows) os << csv_line(r) << "\n";
}

inline void export_csv(const std::vector<Row>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(out, rows);
  if (!out) throw Error("write failed: " + path.string());
}

inline std::vector<Row> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw Error("CSV header mismatch");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw Error("CSV row has " + std::to_string(f.size()) + " fields");
    Row r;
    r.d = std::stoi(f[0]);
    r.t2_us = parse_double(f[1]);
    r.theta = parse_double(f[2]);
    r.phi = parse_double(f[3]);
    r.circuit = f[4];
    if (f[9].rfind("error:", 0) == 0) {
      r.error = f[9].substr(6);
      r.E_e = r.F_e = r.leakage = r.acceptance = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.E_e = parse_double(f[5]);
      r.F_e = parse_double(f[6]);
      r.leakage = parse_double(f[7]);
      r.acceptance = parse_double(f[8]);
      std::stringstream sy(f[9]);
      while (std::getline(sy, cell, ';'))
        if (!cell.empty()) r.syndromes.push_back(parse_double(cell));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<Row> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

// ---------------------------------------------------------------- cache

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Code words keyed by the solver input (Kraus ops, K, d, options).
class CodeCache {
 public:
  explicit CodeCache(std::filesystem::path dir, CodeSynthesisOptions opt = {}) : dir_(std::move(dir)), opt_(opt) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  static std::filesystem::path from_env() {
    const char* e = std::getenv("QUDIT_FTQEC_CACHE");
    return e && *e ? std::filesystem::path(e) : std::filesystem::path();
  }

  std::string key(const KrausSet& ks, int K, int d) const {
    json ops = json::array();
    for (const auto& o : ks.ops) {
      json v = json::array();
      for (Eigen::Index i = 0; i < o.size(); ++i) v.push_back({o(i).real(), o(i).imag()});
      ops.push_back(v);
    }
    json k = {{"kind", "codewords"}, {"version", 1}, {"kraus", ops}, {"K", K}, {"d", d},
              {"threshold", opt_.threshold}, {"norm_weight", opt_.norm_weight}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(k.dump())));
    return buf;
  }

  CodeWords solve(const KrausSet& ks, int K, int d) {
    if (dir_.empty()) return solve_codewords(ks, K, d, opt_);
    auto path = dir_ / ("codewords-" + key(ks, K, d) + ".json");
    if (std::filesystem::exists(path)) {
      try {
        CodeWords cw = codewords_from_json(read_json_file(path));
        if (cw.d() == d && cw.K == K && std::abs(kl_residual(cw, ks, K) - cw.kl_residual) <= 1e-12 &&
            cw.kl_residual < opt_.threshold) {
          ++hits_;
          return cw;
        }
      } catch (const std::exception&) {
        // stale or corrupt entry: fall through and re-solve
      }
    }
    CodeWords cw = solve_codewords(ks, K, d, opt_);
    std::lock_guard<std::mutex> lock(mu_);
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
      std::ofstream out(tmp);
      out << to_json(cw).dump(1) << "\n";
    }
    std::filesystem::rename(tmp, path);
    return cw;
  }

  CodeSolver solver() {
    return [this](const KrausSet& ks, int K, int d) { return solve(ks, K, d); };
  }

  int hits() const { return hits_; }

 private:
  std::filesystem::path dir_;
  CodeSynthesisOptions opt_;
  std::mutex mu_;
  std::atomic<int> hits_{0};
};

// ---------------------------------------------------------------- sweep

struct SweepResult {
  std::vector<Row> rows;
  int failures = 0;
};

inline Row report_row(int d, double t2, double theta, double phi, Circuit c, const CycleReport& r) {
  Row row;
  row.d = d;
  row.t2_us = t2 * 1e6;
  row.theta = theta;
  row.phi = phi;
  row.circuit = circuit_tag(c);
  row.E_e = r.E_e;
  row.F_e = r.F_e;
  row.leakage = r.leakage;
  row.acceptance = r.acceptance;
  row.syndromes = r.syndrome_distribution;
  return row;
}

inline void run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

struct SweepOptions {
  int jobs = 1;
  std::filesystem::path cache_dir;
  std::ostream* progress = nullptr;
};

inline SweepResult run_sweep(const SweepPlan& plan, const SweepOptions& so = {}) {
  const RunConfig& rc = plan.run;
  CodeCache cache(so.cache_dir, rc.model.synthesis);
  CodeSolver solver = cache.solver();
  const Spectrum sp = solve_spectrum(rc.model.topology);
  const double rabi = calibrate_rabi(sp, rc.model, solver);

  struct Point {
    Circuit c;
    int d;
    std::size_t t2, gate;
  };
  std::vector<Point> pts;
  std::vector<int> ds;
  for (Circuit c : plan.circuits) {
    bool bare = c == Circuit::baseline || c == Circuit::two_qubit_baseline;
    bool per_gate = c == Circuit::single_gate_cycle || c == Circuit::baseline;
    for (int d : bare ? std::vector<int>{2} : plan.d_list)
      for (std::size_t t = 0; t < plan.t2.size(); ++t)
        for (std::size_t g = 0; g < (per_gate ? plan.gates.size() : 1); ++g) pts.push_back({c, d, t, g});
    if (!bare) ds.insert(ds.end(), plan.d_list.begin(), plan.d_list.end());
  }
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  // plan order: d, circuit, T2 ascending, gate
  std::vector<std::size_t> circ_rank(4, 0);
  for (std::size_t i = 0; i < plan.circuits.size(); ++i) circ_rank[static_cast<int>(plan.circuits[i])] = i;
  std::stable_sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
    return std::tie(a.d, circ_rank[static_cast<int>(a.c)], a.t2, a.gate) <
           std::tie(b.d, circ_rank[static_cast<int>(b.c)], b.t2, b.gate);
  });

  // codes per d, built in parallel
  std::map<int, std::optional<CompiledCode>> codes;
  std::map<int, std::string> code_err;
  for (int d : ds) codes[d];
  run_parallel(ds.size(), so.jobs, [&](std::size_t i) {
    int d = ds[i];
    try {
      codes[d] = prepare_code(sp, rc.model, d, rabi, solver);
    } catch (const std::exception& e) {
      code_err[d] = e.what();
    }
  });
  // two-qubit architectures
  std::map<int, std::optional<SwitchArchitecture>> arch;
  std::optional<SwitchArchitecture> base_arch;
  std::string base_arch_err;
  for (Circuit c : plan.circuits) {
    if (c == Circuit::two_qubit_cycle)
      for (int d : plan.d_list) {
        if (arch.count(d) || !codes[d]) continue;
        try {
          arch[d] = build_architecture(*codes[d], rc.sw);
        } catch (const std::exception& e) {
          code_err[d] = std::string("switch: ") + e.what();
        }
      }
    if (c == Circuit::two_qubit_baseline && !base_arch) {
      try {
        base_arch = build_baseline_architecture(rabi, rc.sw);
      } catch (const std::exception& e) {
        base_arch_err = e.what();
      }
    }
  }

  SweepResult res;
  res.rows.resize(pts.size());
  std::mutex io;
  std::atomic<std::size_t> done{0};
  run_parallel(pts.size(), so.jobs, [&](std::size_t i) {
    const Point& p = pts[i];
    const double t2 = plan.t2[p.t2];
    auto [theta, phi] = plan.gates[p.gate];
    if (p.c == Circuit::two_qubit_cycle || p.c == Circuit::two_qubit_baseline) {
      theta = rc.sw.phi;
      phi = 0;
    }
    Row row;
    try {
      switch (p.c) {
        case Circuit::single_gate_cycle: {
          if (!codes[p.d]) throw Error(code_err[p.d]);
          row = report_row(p.d, t2, theta, phi, p.c, entanglement_error(*codes[p.d], theta, phi, t2, rc.protocol));
          break;
        }
        case Circuit::baseline: {
          auto r = baseline_report(theta, phi, t2, rabi, rc.baseline_rabi_ratio, rc.protocol.integrator);
          row = report_row(2, t2, theta, phi, p.c, r);
          break;
        }
        case Circuit::two_qubit_cycle: {
          if (!arch.count(p.d) || !arch[p.d]) throw Error(code_err[p.d]);
          row = report_row(p.d, t2, theta, phi, p.c, run_two_qubit_cycle(*arch[p.d], t2, rc.protocol));
          break;
        }
        case Circuit::two_qubit_baseline: {
          if (!base_arch) throw Error(base_arch_err);
          row = report_row(2, t2, theta, phi, p.c, run_two_qubit_cycle(*base_arch, t2, rc.protocol));
          break;
        }
      }
    } catch (const std::exception& e) {
      row = Row{};
      row.d = p.d;
      row.t2_us = t2 * 1e6;
      row.theta = theta;
      row.phi = phi;
      row.circuit = circuit_tag(p.c);
      row.error = e.what();
      if (row.error.empty()) row.error = "failed";
    }
    res.rows[i] = row;
    std::size_t k = ++done;
    if (so.progress) {
      std::lock_guard<std::mutex> lock(io);
      *so.progress << "[" << k << "/" << pts.size() << "] " << row.circuit << " d=" << row.d << " t2_us=" << row.t2_us
                   << " theta=" << row.theta << " phi=" << row.phi << " "
                   << (row.ok() ? "E_e=" + fmt_double(row.E_e) : "error: " + row.error) << "\n";
    }
  });
  for (const auto& r : res.rows) res.failures += r.ok() ? 0 : 1;
  return res;
}

// ---------------------------------------------------------------- fits

struct FitResult {
  double slope = 0, intercept = 0, r_squared = 0;
  int n = 0;
};

inline FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("fit: size mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 4) throw Error("fit needs at least 4 points (have " + std::to_string(n) + ")");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) throw Error("fit: x values are all equal");
  FitResult f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

enum class XKind { inv_t2, dim };

struct FitQuery {
  XKind x = XKind::inv_t2;
  std::string circuit = "cycle";
  int d = 0;           // inv_t2 fits: required unless the circuit has a single d
  double t2_us = 0;    // dim fits: required
  double floor = 1e-14;
};

// gate-averaged E_e keyed by (d, t2_us) for one circuit; rows with errors are dropped
inline std::map<std::pair<int, double>, double> gate_average(const std::vector<Row>& rows, const std::string& circuit) {
  std::map<std::pair<int, double>, std::pair<double, int>> acc;
  std::map<std::pair<int, double>, bool> broken;
  for (const auto& r : rows) {
    if (r.circuit != circuit) continue;
    auto key = std::make_pair(r.d, r.t2_us);
    if (!r.ok() || !std::isfinite(r.E_e)) {
      broken[key] = true;
      continue;
    }
    acc[key].first += r.E_e;
    acc[key].second += 1;
  }
  std::map<std::pair<int, double>, double> out;
  for (auto& [k, v] : acc)
    if (!broken[k]) out[k] = v.first / v.second;
  return out;
}

// log10 axes: inv_t2 -> (log10(1/T2[s]), log10 E), dim -> (d, log10 E)
inline FitResult fit_slope(const std::vector<Row>& rows, const FitQuery& q) {
  auto avg = gate_average(rows, q.circuit);
  std::vector<double> x, y;
  for (const auto& [k, e] : avg) {
    if (!(e >= q.floor)) continue;
    if (q.x == XKind::inv_t2) {
      if (q.d && k.first != q.d) continue;
      x.push_back(std::log10(1e6 / k.second));
    } else {
      if (std::abs(k.second - q.t2_us) > 1e-9 * q.t2_us) continue;
      x.push_back(k.first);
    }
    y.push_back(std::log10(e));
  }
  return fit_line(x, y);
}

// T2 where the corrected curve meets the baseline (log-log interpolation of the first sign change, scanning up)
inline std::optional<double> crossover(const std::vector<double>& t2, const std::vector<double>& e_code,
                                       const std::vector<double>& e_base) {
  for (std::size_t i = 0; i + 1 < t2.size(); ++i) {
    double a = std::log10(e_code[i] / e_base[i]), b = std::log10(e_code[i + 1] / e_base[i + 1]);
    if (a >= 0 && b < 0) {
      double f = a / (a - b);
      return std::pow(10.0, std::log10(t2[i]) + f * (std::log10(t2[i + 1]) - std::log10(t2[i])));
    }
  }
  return std::nullopt;
}

}  // namespace qftqec

#endif
