// qudit-ftqec: command-line driver over the header-only library.
#include "qudit_ftqec/qudit_ftqec.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace qftqec;

namespace {

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error("cannot write " + out);
  f << j.dump(2) << "\n";
}

RunConfig load_model(const std::string& path) {
  return load_run_config(path.empty() ? default_model_path() : std::filesystem::path(path));
}

std::vector<double> to_vec(const VecR& v) { return {v.data(), v.data() + v.size()}; }

struct Context {
  RunConfig rc;
  Spectrum sp;
  CodeCache cache;
  double rabi = 0;

  explicit Context(const std::string& cfg)
      : rc(load_model(cfg)), sp(solve_spectrum(rc.model.topology)), cache(CodeCache::from_env(), rc.model.synthesis) {}

  double rabi_max() {
    if (rabi == 0) rabi = calibrate_rabi(sp, rc.model, cache.solver());
    return rabi;
  }
  CompiledCode code(int d) { return prepare_code(sp, rc.model, d, rabi_max(), cache.solver()); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Qudit-embedded stabilizer QEC: spectra, codes, compiled pulses, cycles and sweeps"};
  app.require_subcommand(1);
  std::string config, out, in;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int d = 4, levels = 16, k = 1;
  double t_ns = 0, t2_us = 10, theta = pi / 2, phi = pi, p_m = 0, floor = 1e-14;
  int n_rep = 1;
  std::string op = "gate", circuit = "cycle", x_kind = "inv_t2";
  bool quiet = false;

  auto* spectrum = app.add_subcommand("spectrum", "diagonalize the spin Hamiltonian and list the low levels");
  auto* kraus = app.add_subcommand("kraus", "dephasing rates and ordered Kraus operators of the d-level qudit");
  auto* codewords = app.add_subcommand("codewords", "solve the code words and error basis for d");
  auto* compile = app.add_subcommand("compile", "generator and pulse schedule of one logical operation");
  auto* cycle = app.add_subcommand("cycle", "one gate + error-correction cycle, as CSV");
  auto* sweep = app.add_subcommand("sweep", "run a sweep plan, as CSV");
  auto* fit = app.add_subcommand("fit", "least-squares slope of log10 E_e");

  for (auto* s : {spectrum, kraus, codewords, compile, cycle}) {
    s->add_option("--config", config, "model JSON (default: bundled Ni7 model)");
    s->add_option("--out", out, "output file (default: stdout)");
  }
  spectrum->add_option("--levels", levels, "number of levels to list")->check(CLI::PositiveNumber);
  for (auto* s : {kraus, codewords, compile, cycle}) s->add_option("--d", d, "qudit dimension (even, >= 4)");
  kraus->add_option("--t-ns", t_ns, "snapshot time in ns (default: compiled calibration gate duration)");
  kraus->add_option("--t2-us", t2_us, "T2 for the rates (default: the model's t2_ref)");
  compile->add_option("--op", op, "gate | cu | recovery | prep")->check(CLI::IsMember({"gate", "cu", "recovery", "prep"}));
  compile->add_option("--k", k, "syndrome for --op recovery");
  for (auto* s : {compile, cycle}) {
    s->add_option("--theta", theta, "rotation angle");
    s->add_option("--phi", phi, "rotation axis phase");
  }
  cycle->add_option("--t2-us", t2_us, "T2 in microseconds");
  cycle->add_option("--p-m", p_m, "per-shot misassignment probability");
  cycle->add_option("--n-rep", n_rep, "odd number of repeated syndrome readouts");
  cycle->add_option("--circuit", circuit, "cycle | baseline | cphase | cphase_baseline");
  sweep->add_option("--config", config, "sweep plan JSON")->required();
  sweep->add_option("--out", out, "CSV output (default: stdout)");
  sweep->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--quiet", quiet, "no progress on stderr");
  fit->add_option("--in", in, "sweep CSV")->required();
  fit->add_option("--out", out, "JSON output (default: stdout)");
  fit->add_option("--x", x_kind, "inv_t2 | dim")->check(CLI::IsMember({"inv_t2", "dim"}));
  fit->add_option("--circuit", circuit, "circuit tag to fit");
  fit->add_option("--d", d, "d for inv_t2 fits (0 = all rows of the circuit)");
  fit->add_option("--t2-us", t2_us, "T2 for dim fits");
  fit->add_option("--floor", floor, "drop gate-averaged points below this E_e");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*spectrum) {
      RunConfig rc = load_model(config);
      Spectrum sp = solve_spectrum(rc.model.topology);
      const int n = std::min<int>(levels, static_cast<int>(sp.eig.energies.size()));
      json lv = json::array();
      for (int i = 0; i < n; ++i) {
        double s2 = total_spin_squared(rc.model.topology, sp.eig.vectors.col(i));
        lv.push_back({{"index", i}, {"energy_GHz", sp.eig.energies(i)}, {"S", spin_from_s2(s2)}});
      }
      emit({{"dim", sp.eig.dim}, {"levels", lv}}, out);
      return 0;
    }
    if (*sweep) {
      SweepPlan plan = load_plan(config);
      SweepOptions so;
      so.jobs = jobs;
      so.cache_dir = CodeCache::from_env();
      so.progress = quiet ? nullptr : &std::cerr;
      SweepResult res = run_sweep(plan, so);
      if (out.empty())
        write_csv(std::cout, res.rows);
      else
        export_csv(res.rows, out);
      if (res.failures) std::cerr << res.failures << " of " << res.rows.size() << " points failed\n";
      return res.failures ? 2 : 0;
    }
    if (*fit) {
      FitQuery q;
      q.x = x_kind == "dim" ? XKind::dim : XKind::inv_t2;
      q.circuit = circuit;
      q.d = q.x == XKind::inv_t2 ? d : 0;
      q.t2_us = t2_us;
      q.floor = floor;
      FitResult f = fit_slope(read_csv(in), q);
      emit({{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"points", f.n}}, out);
      return 0;
    }

    Context ctx(config);
    if (*kraus) {
      QuditCode c;
      double t = t_ns > 0 ? t_ns * 1e-9 : ctx.code(d).code.kraus.t_snapshot;
      c = build_code(ctx.sp, ctx.rc.model, d, t, ctx.cache.solver());
      double t2 = kraus->count("--t2-us") ? t2_us * 1e-6 : ctx.rc.model.t2_ref;
      KrausSet ks = t2 == ctx.rc.model.t2_ref ? c.kraus : kraus_decompose(c.rates(t2), t, ctx.rc.model.kraus);
      json ops = json::array();
      for (int i = 0; i < ks.size(); ++i) {
        json re = json::array(), im = json::array();
        for (int j = 0; j < ks.dim(); ++j) {
          re.push_back(ks.ops[i](j).real());
          im.push_back(ks.ops[i](j).imag());
        }
        ops.push_back({{"norm", ks.norm(i)}, {"re", re}, {"im", im}});
      }
      emit({{"d", d}, {"t_s", t}, {"t2_s", t2}, {"rates_per_s", real_matrix_json(c.rates(t2))},
            {"Z", real_matrix_json(c.Z)}, {"kraus", ops}},
           out);
      return 0;
    }
    if (*codewords) {
      CompiledCode cc = ctx.code(d);
      emit({{"d", d}, {"t_snapshot_s", cc.code.kraus.t_snapshot}, {"rabi_max_rad_s", cc.rabi_max},
            {"energies_GHz", to_vec(cc.code.energies)}, {"spin_labels", to_vec(cc.code.spin_labels)},
            {"codewords", to_json(cc.code.words)}, {"error_basis", to_json(cc.code.basis)}},
           out);
      return 0;
    }
    if (*compile) {
      CompiledCode cc = ctx.code(d);
      CompiledOp o;
      if (op == "gate") o = cc.gate(theta, phi);
      if (op == "cu") o = cc.cu;
      if (op == "prep") o = cc.prep;
      if (op == "recovery") {
        if (k < 1 || k >= cc.K()) throw ConfigError("--k must lie in [1, K)");
        o = cc.recovery[k];
      }
      json j = {{"d", d}, {"op", op}, {"tau_s", o.tau}, {"generator", complex_matrix_json(o.generator)}};
      if (op != "cu") j["schedule"] = to_json(schedule_pulses(o.generator, cc.code.energies, cc.rabi_max));
      emit(j, out);
      return 0;
    }
    if (*cycle) {
      json plan = {{"model", ctx.rc.source},
                   {"d_list", {d}},
                   {"t2_us", {t2_us}},
                   {"gates", {{theta, phi}}},
                   {"circuits", {circuit}},
                   {"measurement", {{"p_m", p_m}, {"n_rep", n_rep}}}};
      SweepOptions so;
      so.cache_dir = CodeCache::from_env();
      SweepResult res = run_sweep(parse_plan(plan), so);
      if (out.empty())
        write_csv(std::cout, res.rows);
      else
        export_csv(res.rows, out);
      for (const auto& r : res.rows)
        if (!r.ok()) std::cerr << "error: " << r.error << "\n";
      return res.failures ? 2 : 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
