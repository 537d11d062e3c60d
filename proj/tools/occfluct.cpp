#include "occfluct/harness.hpp"
#include "occfluct/laplace_verify.hpp"
#include "occfluct/limit_laws.hpp"
#include "occfluct/log.hpp"
#include "occfluct/model.hpp"
#include "occfluct/stable_numerics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace occfluct;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::int64_t> replicas, shard_size;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output_dir;
  std::vector<double> T;
  std::optional<double> path_step;
  std::vector<std::string> sets;
  bool fresh = false;
  bool verbose = false;

  void add_to(CLI::App* app, bool config_required) {
    auto* c = app->add_option("-c,--config", config, "JSON experiment config");
    if (config_required) c->required()->check(CLI::ExistingFile);
    app->add_option("--replicas", replicas, "replica count");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--output-dir", output_dir, "artifact directory (relative to $OCCFLUCT_OUTPUT_ROOT)");
    app->add_option("--T", T, "horizons");
    app->add_option("--path-step", path_step, "path/observation step");
    app->add_option("--shard-size", shard_size, "replicas per record file");
    app->add_option("--set", sets, "override any key: a.b.c=<json value>");
    app->add_flag("--fresh", fresh, "ignore existing record shards");
    app->add_flag("-v,--verbose", verbose, "progress messages");
  }

  json apply(json j) const {
    if (replicas) j["replicas"] = *replicas;
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (output_dir) j["output_dir"] = *output_dir;
    if (!T.empty()) j["T"] = T;
    if (path_step) j["path_step"] = *path_step;
    if (shard_size) j["shard_size"] = *shard_size;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      std::string path = "/" + s.substr(0, eq);
      for (auto& ch : path)
        if (ch == '.') ch = '/';
      json v;
      try {
        v = json::parse(s.substr(eq + 1));
      } catch (const json::parse_error&) {
        v = s.substr(eq + 1);
      }
      j[json::json_pointer(path)] = v;
    }
    return j;
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int report(const RunResult& r) {
  std::cout << "artifact: " << r.dir.string() << "\n";
  for (const auto& a : r.assertions)
    std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << (a.detail.empty() ? "" : ": " + a.detail) << "\n";
  if (r.failures) std::cout << r.failures << " replica failures (see failures.csv)\n";
  return r.all_pass() ? 0 : 1;
}

json reference_triangle() {
  return json{{"name", "laplace-triangle"},
              {"kind", "laplace-triangle"},
              {"model", {{"d", 1}, {"alpha", 1.5}, {"beta", 0.5}, {"V", 1.0}}},
              {"T", {10.0}},
              {"replicas", 20000},
              {"box", {{"eps_trunc", 1e-3}}},
              {"phi", {{"sigma", 1.0}}},
              {"psi", {{"type", "constant"}, {"c", 1.0}}},
              {"path_step", 0.25},
              {"seed", 1},
              {"triangle", {{"spot_points", {{0, 10}, {2, 10}, {0, 5}, {5, 5}, {1, 2.5}}}}},
              {"assertions", {{"triangle_sigmas", 3}, {"oracle_sigmas", 3}}}};
}

ModelParams model_from(int d, double alpha, double beta, double V) {
  ModelParams p;
  p.d = d;
  p.alpha = alpha;
  p.beta = beta;
  p.V = V;
  p.validate();
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occfluct: occupation time fluctuations of stable branching particle systems"};
  app.require_subcommand(1);

  Overrides sim_o, lap_o, cal_o;
  auto* sim = app.add_subcommand("simulate", "run an experiment from a config file");
  sim_o.add_to(sim, true);

  auto* lap = app.add_subcommand("verify-laplace", "Laplace functional check: Monte Carlo against the v_T solver");
  lap_o.add_to(lap, false);

  auto* lim = app.add_subcommand("limits", "constants K, K1, K2, limit CF tables and deterministic limits");
  int d = 1;
  double alpha = 2.0, beta = 0.5, V = 1.0, sigma = 1.0, t = 1.0, zmax = 5.0;
  int zpoints = 101;
  std::string cf_out;
  std::vector<double> limit_T;
  lim->add_option("--d", d)->required();
  lim->add_option("--alpha", alpha)->required();
  lim->add_option("--beta", beta)->required();
  lim->add_option("--V", V);
  lim->add_option("--sigma", sigma, "Gaussian phi width");
  lim->add_option("--t", t, "time of <X(t), phi>");
  lim->add_option("--cf-table", cf_out, "write z,re,im of the limit CF");
  lim->add_option("--z-max", zmax);
  lim->add_option("--z-points", zpoints);
  lim->add_option("--T", limit_T, "horizons for the deterministic limit table");

  auto* reg = app.add_subcommand("regime", "classify (d, alpha, beta) and print the norming");
  int rd = 1;
  double ralpha = 2.0, rbeta = 0.5;
  std::vector<double> rT;
  reg->add_option("--d", rd)->required();
  reg->add_option("--alpha", ralpha)->required();
  reg->add_option("--beta", rbeta)->required();
  reg->add_option("--T", rT, "horizons");

  auto* st = app.add_subcommand("stats", "recompute statistics of an artifact directory");
  std::string st_dir;
  bool st_verbose = false;
  st->add_option("dir", st_dir, "artifact directory")->required()->check(CLI::ExistingDirectory);
  st->add_flag("-v,--verbose", st_verbose);

  auto* cal = app.add_subcommand("calibrate", "size of the statistical tests on synthetic stable data");
  cal_o.add_to(cal, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      if (sim_o.verbose) log::set_level(log::Level::Info);
      const ExperimentConfig c = parse_config(sim_o.apply(read_json(sim_o.config)));
      RunOptions o;
      o.resume = !sim_o.fresh;
      return report(run_experiment(c, o));
    }
    if (*lap) {
      if (lap_o.verbose) log::set_level(log::Level::Info);
      json j = lap_o.config.empty() ? reference_triangle() : read_json(lap_o.config);
      j["kind"] = "laplace-triangle";
      const ExperimentConfig c = parse_config(lap_o.apply(j));
      RunOptions o;
      o.resume = !lap_o.fresh;
      const RunResult r = run_experiment(c, o);
      std::cout << r.summary["triangle"].dump(2) << "\n";
      return report(r);
    }
    if (*cal) {
      if (cal_o.verbose) log::set_level(log::Level::Info);
      json j = cal_o.config.empty()
                   ? json{{"name", "calibration"}, {"kind", "calibration"}, {"assertions", {{"calibration_band", 0.02}}}}
                   : read_json(cal_o.config);
      j["kind"] = "calibration";
      const ExperimentConfig c = parse_config(cal_o.apply(j));
      return report(run_experiment(c));
    }
    if (*st) {
      if (st_verbose) log::set_level(log::Level::Info);
      const ExperimentConfig c = parse_config(read_json((fs::path(st_dir) / "config.json").string()));
      const RunResult r = analyze(c, st_dir);
      std::cout << r.summary.dump(2) << "\n";
      return report(r);
    }
    if (*reg) {
      const ModelParams p = model_from(rd, ralpha, rbeta, 1.0);
      const RegimeInfo info = classify_regime(p);
      std::cout << "regime: " << to_string(info.regime) << "\ncritical dimension: " << info.critical_dimension
                << "\nlower dimension: " << info.lower_dimension << "\n";
      for (double T : rT) {
        try {
          const Norming n = norming(p, T);
          std::cout << "F_T(" << T << ") = " << std::setprecision(10) << n.value
                    << (n.provisional ? " (provisional; alternative " + std::to_string(n.alternative) + ")" : "")
                    << "\n";
        } catch (const std::invalid_argument& e) {
          std::cout << "F_T(" << T << "): " << e.what() << "\n";
        }
      }
      return 0;
    }
    if (*lim) {
      const ModelParams p = model_from(d, alpha, beta, V);
      const Regime r = classify_regime(p).regime;
      const TestFunction phi = TestFunction::gaussian(d, sigma);
      std::cout << std::setprecision(12) << "regime: " << to_string(r) << "\nK = " << constant_K(V, beta) << "\n";
      std::optional<StableLimitLaw> law;
      if (r == Regime::Critical) {
        const CriticalConstants cc = constant_K1(p);
        std::cout << "K2 = " << cc.K2.value << " +- " << cc.K2.abs_error << "\nK1 = " << cc.K1.value << " +- "
                  << cc.K1.abs_error << "\n";
        law = critical_limit_law(p, phi, t);
      } else if (r == Regime::Large) {
        law = large_limit_law(p, phi, t);
      }
      if (law)
        std::cout << "limit law of <X(" << t << "), phi>: index " << law->index << ", |z|^index coefficient "
                  << law->scale << ", skew " << law->skew << "\n";
      if (!cf_out.empty()) {
        if (!law) throw std::invalid_argument("no limit CF in the " + std::string(to_string(r)) + " regime");
        std::vector<double> z;
        for (int i = 0; i < zpoints; ++i) z.push_back(-zmax + 2.0 * zmax * i / std::max(1, zpoints - 1));
        std::ofstream os(cf_out);
        write_cf_table(os, *law, z);
      }
      if (!limit_T.empty()) {
        LimitTable tab;
        if (r == Regime::Large) tab = deterministic_limit_I2(p, phi, TimeProfile::constant(1.0), limit_T);
        else if (r == Regime::Critical) tab = critical_log_limit(p, phi, limit_T);
        else throw std::invalid_argument("deterministic limits need the large or critical regime");
        std::cout << "limit " << tab.limit.value << "\nT,value,abs_error,rel_gap\n";
        for (const auto& row : tab.rows)
          std::cout << row.T << ',' << row.value.value << ',' << row.value.abs_error << ',' << row.rel_gap << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
