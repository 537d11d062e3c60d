#include "occfluct/harness.hpp"

#include "occfluct/branching_sim.hpp"
#include "occfluct/laplace_verify.hpp"
#include "occfluct/limit_laws.hpp"
#include "occfluct/log.hpp"
#include "occfluct/samplers.hpp"
#include "occfluct/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace occfluct {

using nlohmann::json;

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::FluctuationLimit: return "fluctuation-limit";
    case ExperimentKind::LaplaceTriangle: return "laplace-triangle";
    case ExperimentKind::DeterministicLimits: return "deterministic-limits";
    case ExperimentKind::TailBound: return "tail-bound";
    case ExperimentKind::Calibration: return "calibration";
  }
  return "?";
}

bool RunResult::all_pass() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const AssertionResult& a) { return a.pass; });
}

// ---------------------------------------------------------------------------
// Config

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad(where.empty() ? k : where + "." + k, "unknown key");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(where.empty() ? key : where + "." + key, e.what());
  }
}

std::vector<std::pair<double, double>> get_pairs(const json& j, const char* key, const std::string& where) {
  std::vector<std::pair<double, double>> out;
  if (!j.contains(key)) return out;
  const auto& a = j.at(key);
  if (!a.is_array()) bad(where + "." + key, "expected a list of pairs");
  for (const auto& p : a) {
    if (!p.is_array() || p.size() != 2) bad(where + "." + key, "expected pairs [a, b]");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

Regime parse_regime(const std::string& s) {
  if (s == "large") return Regime::Large;
  if (s == "critical") return Regime::Critical;
  if (s == "intermediate") return Regime::Intermediate;
  if (s == "below-intermediate") return Regime::BelowIntermediate;
  bad("expect_regime", "unknown regime '" + s + "'");
}

ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::FluctuationLimit, ExperimentKind::LaplaceTriangle, ExperimentKind::DeterministicLimits,
                 ExperimentKind::TailBound, ExperimentKind::Calibration})
    if (to_string(k) == s) return k;
  bad("kind", "unknown experiment kind '" + s + "'");
}

TestFunction parse_phi(const json& j, int d, std::string& id) {
  only_keys(j, "phi", {"id", "sigma", "height", "center", "bumps"});
  id = get<std::string>(j, "id", "phi", "phi");
  std::vector<GaussianBump> bumps;
  if (j.contains("bumps")) {
    if (j.contains("sigma") || j.contains("height")) bad("phi", "give either bumps or sigma/height");
    for (const auto& b : j.at("bumps")) {
      only_keys(b, "phi.bumps[]", {"weight", "sigma", "center"});
      bumps.push_back({get<double>(b, "weight", "phi.bumps[]", 1.0), get<std::vector<double>>(b, "center", "phi.bumps[]", {}),
                       get<double>(b, "sigma", "phi.bumps[]", 1.0)});
    }
  } else {
    bumps.push_back({get<double>(j, "height", "phi", 1.0), get<std::vector<double>>(j, "center", "phi", {}),
                     get<double>(j, "sigma", "phi", 1.0)});
  }
  try {
    return TestFunction(d, std::move(bumps));
  } catch (const std::invalid_argument& e) {
    bad("phi", e.what());
  }
}

TimeProfile parse_psi(const json& j) {
  only_keys(j, "psi", {"type", "c", "a", "b", "t1", "w"});
  const auto type = get<std::string>(j, "type", "psi", "constant");
  try {
    if (type == "constant") return TimeProfile::constant(get<double>(j, "c", "psi", 1.0));
    if (type == "indicator") return TimeProfile::indicator(get<double>(j, "a", "psi", 0.0), get<double>(j, "b", "psi", 1.0));
    if (type == "point_mass") return TimeProfile::point_mass(get<double>(j, "t1", "psi", 1.0));
    if (type == "bump") return TimeProfile::bump(get<double>(j, "c", "psi", 0.5), get<double>(j, "w", "psi", 0.1));
  } catch (const std::invalid_argument& e) {
    bad("psi", e.what());
  }
  bad("psi.type", "unknown profile '" + type + "'");
}

bool contains_time(const std::vector<double>& grid, double t) {
  return std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(g - t) < 1e-12; });
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  only_keys(j, "", {"name", "kind", "model", "expect_regime", "T", "replicas", "box", "phi", "psi", "t_grid", "path_step",
                    "seed", "output_dir", "threads", "shard_size", "norming", "centering", "stats", "triangle",
                    "calibration", "assertions"});
  ExperimentConfig c;
  c.raw = j;
  c.name = get<std::string>(j, "name", "", "experiment");
  if (!j.contains("kind")) bad("kind", "required");
  c.kind = parse_kind(j.at("kind").get<std::string>());

  const json m = j.value("model", json::object());
  only_keys(m, "model", {"d", "alpha", "beta", "V", "intensity"});
  c.model.d = get<int>(m, "d", "model", 1);
  c.model.alpha = get<double>(m, "alpha", "model", 2.0);
  c.model.beta = get<double>(m, "beta", "model", 0.5);
  c.model.V = get<double>(m, "V", "model", 1.0);
  c.model.intensity = get<double>(m, "intensity", "model", 1.0);
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    bad("model", e.what());
  }
  if (j.contains("expect_regime")) {
    c.expect_regime = parse_regime(j.at("expect_regime").get<std::string>());
    const Regime actual = classify_regime(c.model).regime;
    if (actual != *c.expect_regime)
      bad("expect_regime", "model is in the " + std::string(to_string(actual)) + " regime");
  }

  c.T = get<std::vector<double>>(j, "T", "", {});
  for (double T : c.T)
    if (!(T > 0.0)) bad("T", "values must be positive");
  if (c.kind != ExperimentKind::Calibration && c.T.empty()) bad("T", "at least one horizon is required");
  c.replicas = get<std::int64_t>(j, "replicas", "", 0);
  if (c.replicas < 0) bad("replicas", "must be >= 0");

  if (j.contains("box")) {
    const auto& b = j.at("box");
    only_keys(b, "box", {"half_width", "eps_trunc"});
    if (b.contains("half_width")) {
      c.box_half_width = b.at("half_width").get<double>();
      if (!(*c.box_half_width > 0.0)) bad("box.half_width", "must be positive");
    }
    c.eps_trunc = get<double>(b, "eps_trunc", "box", 1e-3);
    if (!(c.eps_trunc > 0.0)) bad("box.eps_trunc", "must be positive");
  }
  c.phi = parse_phi(j.value("phi", json::object()), c.model.d, c.phi_id);
  if (j.contains("psi")) c.psi = parse_psi(j.at("psi"));

  c.t_grid = get<std::vector<double>>(j, "t_grid", "", {0.0, 1.0});
  std::sort(c.t_grid.begin(), c.t_grid.end());
  c.t_grid.erase(std::unique(c.t_grid.begin(), c.t_grid.end()), c.t_grid.end());
  for (double t : c.t_grid)
    if (t < 0.0 || t > 1.0) bad("t_grid", "times must lie in [0, 1]");
  if (c.t_grid.empty() || c.t_grid.back() <= 0.0) bad("t_grid", "needs a positive time");
  c.path_step = get<double>(j, "path_step", "", 0.1);
  if (!(c.path_step > 0.0)) bad("path_step", "must be positive");
  c.seed = get<std::uint64_t>(j, "seed", "", 1);
  c.output_dir = get<std::string>(j, "output_dir", "", c.name);
  c.threads = get<int>(j, "threads", "", 1);
  if (c.threads < 1) bad("threads", "must be >= 1");
  c.shard_size = get<std::int64_t>(j, "shard_size", "", 100);
  if (c.shard_size < 1) bad("shard_size", "must be >= 1");

  if (j.contains("norming")) {
    const auto& n = j.at("norming");
    only_keys(n, "norming", {"kind", "exponent", "values", "intermediate"});
    const auto k = get<std::string>(n, "kind", "norming", "auto");
    if (k == "auto") c.norming.kind = NormingSpec::Kind::Auto;
    else if (k == "power") c.norming.kind = NormingSpec::Kind::Power;
    else if (k == "values") c.norming.kind = NormingSpec::Kind::Values;
    else bad("norming.kind", "expected auto, power or values");
    c.norming.exponent = get<double>(n, "exponent", "norming", 0.0);
    c.norming.values = get<std::vector<double>>(n, "values", "norming", {});
    const auto v = get<std::string>(n, "intermediate", "norming", "printed");
    if (v != "printed" && v != "continuous") bad("norming.intermediate", "expected printed or continuous");
    c.norming.continuous_intermediate = v == "continuous";
    if (c.norming.kind == NormingSpec::Kind::Values && c.norming.values.size() != c.T.size())
      bad("norming.values", "needs one value per T");
  }
  const auto cen = get<std::string>(j, "centering", "", "truncated");
  if (cen == "truncated") c.centering = Centering::Truncated;
  else if (cen == "exact") c.centering = Centering::Exact;
  else bad("centering", "expected exact or truncated");

  if (j.contains("stats")) {
    const auto& s = j.at("stats");
    only_keys(s, "stats", {"t", "z_max", "z_points", "resamples", "increments", "intervals", "deltas", "min_exceed"});
    c.stats.t = get<double>(s, "t", "stats", 1.0);
    if (s.contains("z_max")) c.stats.z_max = s.at("z_max").get<double>();
    c.stats.z_points = get<int>(s, "z_points", "stats", 16);
    c.stats.resamples = get<int>(s, "resamples", "stats", 400);
    c.stats.increments = get_pairs(s, "increments", "stats");
    c.stats.intervals = get_pairs(s, "intervals", "stats");
    c.stats.deltas = get<std::vector<double>>(s, "deltas", "stats", {});
    c.stats.min_exceed = get<std::int64_t>(s, "min_exceed", "stats", 10);
    if (!c.stats.increments.empty() && c.stats.increments.size() != 2) bad("stats.increments", "needs two intervals");
  }
  if (c.kind == ExperimentKind::FluctuationLimit) {
    if (!contains_time(c.t_grid, c.stats.t)) bad("stats.t", "must be a point of t_grid");
    for (const auto& [a, b] : c.stats.increments)
      if (!contains_time(c.t_grid, a) || !contains_time(c.t_grid, b) || a > b)
        bad("stats.increments", "interval ends must be ordered points of t_grid");
    if (c.stats.increments.size() == 2 && c.stats.increments[0].second > c.stats.increments[1].first)
      bad("stats.increments", "intervals must be disjoint and ordered");
  }
  if (c.kind == ExperimentKind::TailBound) {
    if (c.stats.intervals.empty() || c.stats.deltas.empty()) bad("stats", "tail-bound needs intervals and deltas");
    for (const auto& [a, b] : c.stats.intervals)
      if (!contains_time(c.t_grid, a) || !contains_time(c.t_grid, b) || a > b)
        bad("stats.intervals", "interval ends must be ordered points of t_grid");
    for (double d : c.stats.deltas)
      if (!(d > 0.0 && d < 1.0)) bad("stats.deltas", "values must lie in (0, 1)");
    for (double T : c.T)
      if (T < 2.0) bad("T", "tail-bound needs T >= 2");
  }

  if (j.contains("triangle")) {
    const auto& t = j.at("triangle");
    only_keys(t, "triangle", {"half_width", "dx", "dt", "F_T", "spot_points", "oracle_replicas"});
    c.triangle.half_width = get<double>(t, "half_width", "triangle", 8192.0);
    c.triangle.dx = get<double>(t, "dx", "triangle", 0.5);
    c.triangle.dt = get<double>(t, "dt", "triangle", 0.01);
    if (t.contains("F_T")) c.triangle.F_T = t.at("F_T").get<double>();
    c.triangle.spot_points = get_pairs(t, "spot_points", "triangle");
    c.triangle.oracle_replicas = get<std::int64_t>(t, "oracle_replicas", "triangle", 20000);
  }
  if (c.kind == ExperimentKind::LaplaceTriangle) {
    if (c.T.size() != 1) bad("T", "laplace-triangle takes a single horizon");
    if (c.model.d != 1) bad("model.d", "laplace-triangle is implemented for d = 1");
    if (!c.phi.nonnegative()) bad("phi", "laplace-triangle needs phi >= 0");
    const double K = c.T[0] / c.path_step;
    if (std::abs(K - std::round(K)) > 1e-9) bad("path_step", "must divide T");
    for (const auto& [x, t] : c.triangle.spot_points) {
      const double r = (c.T[0] - t) / c.path_step;
      if (!(t > 0.0 && t <= c.T[0]) || std::abs(r - std::round(r)) > 1e-9)
        bad("triangle.spot_points", "t must lie in (0, T] with T - t on the path grid");
      if (std::abs(x) > 0.5 * c.triangle.half_width) bad("triangle.spot_points", "x outside the solver domain");
    }
  }
  if (j.contains("calibration")) {
    const auto& s = j.at("calibration");
    only_keys(s, "calibration", {"index", "scale", "n", "runs", "tests", "index_n", "index_runs"});
    c.calibration.index = get<double>(s, "index", "calibration", 1.5);
    c.calibration.scale = get<double>(s, "scale", "calibration", 1.0);
    c.calibration.n = get<std::size_t>(s, "n", "calibration", 2000);
    c.calibration.runs = get<int>(s, "runs", "calibration", 100);
    c.calibration.tests = get<std::vector<std::string>>(s, "tests", "calibration", c.calibration.tests);
    c.calibration.index_n = get<std::size_t>(s, "index_n", "calibration", 100000);
    c.calibration.index_runs = get<int>(s, "index_runs", "calibration", 20);
    for (const auto& t : c.calibration.tests)
      if (t != "cf_distance" && t != "independence" && t != "index") bad("calibration.tests", "unknown test '" + t + "'");
    if (!(c.calibration.index > 1.0 && c.calibration.index < 2.0)) bad("calibration.index", "must lie in (1, 2)");
  }
  if (j.contains("assertions")) {
    const auto& a = j.at("assertions");
    only_keys(a, "assertions", {"cf_distance_decreasing", "cf_below_threshold", "index_range", "scale_rel_tol",
                                "independence_below_threshold", "triangle_sigmas", "oracle_sigmas", "gap_decreasing",
                                "final_gap_below", "tail_slope_at_least", "calibration_band"});
    auto& A = c.assertions;
    A.cf_distance_decreasing = get<bool>(a, "cf_distance_decreasing", "assertions", false);
    A.cf_below_threshold = get<bool>(a, "cf_below_threshold", "assertions", false);
    if (a.contains("index_range")) {
      const auto r = a.at("index_range").get<std::vector<double>>();
      if (r.size() != 2 || r[0] > r[1]) bad("assertions.index_range", "expected [lo, hi]");
      A.index_range = {r[0], r[1]};
    }
    if (a.contains("scale_rel_tol")) A.scale_rel_tol = a.at("scale_rel_tol").get<double>();
    A.independence_below_threshold = get<bool>(a, "independence_below_threshold", "assertions", false);
    if (a.contains("triangle_sigmas")) A.triangle_sigmas = a.at("triangle_sigmas").get<double>();
    if (a.contains("oracle_sigmas")) A.oracle_sigmas = a.at("oracle_sigmas").get<double>();
    A.gap_decreasing = get<bool>(a, "gap_decreasing", "assertions", false);
    if (a.contains("final_gap_below")) A.final_gap_below = a.at("final_gap_below").get<double>();
    if (a.contains("tail_slope_at_least")) A.tail_slope_at_least = a.at("tail_slope_at_least").get<double>();
    if (a.contains("calibration_band")) A.calibration_band = a.at("calibration_band").get<double>();
    if (A.independence_below_threshold && c.stats.increments.size() != 2)
      bad("assertions.independence_below_threshold", "needs stats.increments");
  }
  // norming must be computable for every T
  if (c.kind == ExperimentKind::FluctuationLimit || c.kind == ExperimentKind::TailBound) {
    for (std::size_t i = 0; i < c.T.size(); ++i) {
      try {
        (void)norming_for(c, i);
      } catch (const std::invalid_argument& e) {
        bad("norming", e.what());
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + file.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::string config_hash(const json& j) {
  json k = j;
  if (k.is_object()) {
    k.erase("output_dir");
    k.erase("threads");
  }
  const std::string s = k.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

fs::path output_root() {
  if (const char* e = std::getenv("OCCFLUCT_OUTPUT_ROOT"); e && *e) return e;
  return "runs";
}

fs::path artifact_dir(const ExperimentConfig& c) {
  const fs::path d = c.output_dir;
  return d.is_absolute() ? d : output_root() / d;
}

double norming_for(const ExperimentConfig& c, std::size_t i) {
  const double T = c.T.at(i);
  switch (c.norming.kind) {
    case NormingSpec::Kind::Power: return std::pow(T, c.norming.exponent);
    case NormingSpec::Kind::Values: return c.norming.values.at(i);
    case NormingSpec::Kind::Auto: break;
  }
  return norming(c.model, T,
                 c.norming.continuous_intermediate ? IntermediateExponent::Continuous : IntermediateExponent::Printed)
      .value;
}

double box_for(const ExperimentConfig& c, double horizon) {
  if (c.box_half_width) return *c.box_half_width;
  const StableKernel k(c.model.d, c.model.alpha);
  return box_half_width_for_budget(k, c.model, c.phi, horizon, c.eps_trunc);
}

// ---------------------------------------------------------------------------
// Records

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string record_header(const ExperimentConfig& c, const std::string& hash, std::int64_t shard, std::int64_t lo,
                          std::int64_t hi) {
  std::ostringstream os;
  os << "# occfluct records v1\n# config_hash=" << hash << "\n# kind=" << to_string(c.kind) << "\n# shard=" << shard
     << " replicas=" << lo << "-" << hi - 1 << "\n";
  if (c.kind == ExperimentKind::LaplaceTriangle)
    os << "# units: Y dimensionless functional sum_k W_k <N_{s_k}, Psi_T(., s_k)>; value exp(-(Y - m_B))\n"
       << "replica,Y,value,seed\n";
  else
    os << "# units: T model time; t fraction of T; value (occupation - mean) / F_T; "
          "bias_bound mean occupation lost to the box / F_T\n"
       << "replica,T,t,value,bias_bound,seed\n";
  return os.str();
}

struct PerT {
  double T, F_T, L, horizon;
  Box box;
  std::vector<double> means, bias;
  SimOptions opt;
};

std::vector<PerT> prepare_occupation(const ExperimentConfig& c) {
  std::vector<PerT> out;
  const StableKernel k(c.model.d, c.model.alpha);
  for (std::size_t i = 0; i < c.T.size(); ++i) {
    PerT pt;
    pt.T = c.T[i];
    pt.F_T = norming_for(c, i);
    pt.horizon = pt.T * c.t_grid.back();
    pt.L = box_for(c, pt.horizon);
    pt.box = Box::cube(c.model.d, pt.L);
    std::vector<double> extra;
    for (double t : c.t_grid) extra.push_back(pt.T * t);
    pt.opt.grid = observation_grid(pt.horizon, c.path_step, extra);
    for (double t : c.t_grid) {
      const double h = pt.T * t;
      pt.means.push_back(h > 0.0 ? centering_mean(k, c.model, c.phi, h, c.centering, pt.box) : 0.0);
      pt.bias.push_back(h > 0.0 ? truncation_bias(k, c.model, c.phi, h, pt.box).value / pt.F_T : 0.0);
    }
    log::info("T=", pt.T, " F_T=", pt.F_T, " box half-width=", pt.L, " grid points=", pt.opt.grid.size());
    out.push_back(std::move(pt));
  }
  return out;
}

std::uint64_t stream_id(std::size_t T_index, std::int64_t replica) {
  return (static_cast<std::uint64_t>(T_index) << 40) | static_cast<std::uint64_t>(replica);
}

std::string run_occupation_shard(const ExperimentConfig& c, const std::vector<PerT>& pts, std::int64_t lo,
                                 std::int64_t hi, std::int64_t& failures) {
  std::ostringstream rows;
  std::ostringstream fails;
  for (std::int64_t r = lo; r < hi; ++r) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const PerT& pt = pts[i];
      try {
        RandomStream rng(c.seed, stream_id(i, r));
        OccupationObserver obs(pt.opt.grid, {c.phi});
        PathObserver* os[] = {&obs};
        run_population(c.model, pt.box, pt.horizon, pt.opt, os, rng);
        FluctuationRecord rec;
        rec.replica = r;
        rec.T = pt.T;
        rec.seed = c.seed;
        rec.t_grid = c.t_grid;
        rec.bias_bound = 0.0;
        for (std::size_t m = 0; m < c.t_grid.size(); ++m) {
          const double h = pt.T * c.t_grid[m];
          const double occ = h > 0.0 ? obs.occupation_until(0, h) : 0.0;
          rec.values.push_back(fluctuation_value(occ, pt.means[m], pt.F_T));
        }
        // one row per t with its own bias bound
        for (std::size_t m = 0; m < c.t_grid.size(); ++m)
          rows << r << ',' << fmt(pt.T) << ',' << fmt(c.t_grid[m]) << ',' << fmt(rec.values[m]) << ','
               << fmt(pt.bias[m]) << ',' << c.seed << '\n';
      } catch (const std::exception& e) {
        ++failures;
        fails << "# failed replica=" << r << " T=" << fmt(pt.T) << ": " << e.what() << '\n';
      }
    }
  }
  return fails.str() + rows.str();
}

std::string run_triangle_shard(const ExperimentConfig& c, const LaplaceMcPlan& plan, std::int64_t lo,
                               std::int64_t hi, std::int64_t& failures) {
  std::ostringstream rows, fails;
  for (std::int64_t r = lo; r < hi; ++r) {
    try {
      const double y = laplace_replica_Y(plan, r, c.seed);
      rows << r << ',' << fmt(y) << ',' << fmt(std::exp(-(y - plan.centering))) << ',' << c.seed << '\n';
    } catch (const std::exception& e) {
      ++failures;
      fails << "# failed replica=" << r << ": " << e.what() << '\n';
    }
  }
  return fails.str() + rows.str();
}

PsiProfile triangle_psi(const ExperimentConfig& c) {
  PsiProfile psi;
  psi.terms.push_back({c.phi, c.psi});
  return psi;
}

double triangle_F(const ExperimentConfig& c) {
  return c.triangle.F_T.value_or(std::pow(c.T[0], 1.0 / (1.0 + c.model.beta)));
}

Box triangle_box(const ExperimentConfig& c) { return Box::cube(1, box_for(c, c.T[0])); }

template <class Fn>
std::int64_t run_shards(const ExperimentConfig& c, const fs::path& dir, const std::string& hash, bool resume, Fn&& shard) {
  const fs::path rec = dir / "records";
  fs::create_directories(rec);
  const std::int64_t nshards = (c.replicas + c.shard_size - 1) / c.shard_size;
  std::vector<std::int64_t> todo;
  for (std::int64_t s = 0; s < nshards; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "shard_%06lld.csv", static_cast<long long>(s));
    if (resume && fs::exists(rec / name)) continue;
    todo.push_back(s);
  }
  log::info(todo.size(), " of ", nshards, " shards to run");
  std::atomic<std::size_t> next{0};
  std::atomic<std::int64_t> failures{0};
  std::mutex err_mu;
  std::string err;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= todo.size()) return;
      const std::int64_t s = todo[i];
      const std::int64_t lo = s * c.shard_size, hi = std::min(c.replicas, lo + c.shard_size);
      try {
        std::int64_t f = 0;
        const std::string body = shard(lo, hi, f);
        failures += f;
        char name[32];
        std::snprintf(name, sizeof name, "shard_%06lld.csv", static_cast<long long>(s));
        write_atomically(rec / name, record_header(c, hash, s, lo, hi) + body);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (err.empty()) err = e.what();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(c.threads, static_cast<int>(todo.size())));
  if (nt == 1) work();
  else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (!err.empty()) throw std::runtime_error("shard failed: " + err);
  return failures;
}

}  // namespace

int Records::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> Records::select(const std::string& value_col, double T, double t) const {
  const int v = column(value_col), cT = column("T"), ct = column("t");
  if (columns.empty()) return {};
  if (v < 0) throw std::invalid_argument("records have no column " + value_col);
  std::vector<double> out;
  for (const auto& r : rows) {
    if (!std::isnan(T) && cT >= 0 && std::abs(r[cT] - T) > 1e-9 * std::max(1.0, T)) continue;
    if (!std::isnan(t) && ct >= 0 && std::abs(r[ct] - t) > 1e-12) continue;
    out.push_back(r[v]);
  }
  return out;
}

std::vector<double> Records::replica_ids(double T, double t) const { return select("replica", T, t); }

std::vector<fs::path> record_files(const fs::path& dir) {
  std::vector<fs::path> out;
  const fs::path rec = dir / "records";
  if (!fs::exists(rec)) return out;
  for (const auto& e : fs::directory_iterator(rec))
    if (e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Records aggregate(const std::vector<fs::path>& files) {
  Records out;
  std::set<std::tuple<long long, double, double>> seen;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot read " + f.string());
    std::string line, hash, kind;
    std::vector<std::string> cols;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (line.rfind("# config_hash=", 0) == 0) hash = line.substr(14);
        else if (line.rfind("# kind=", 0) == 0) kind = line.substr(7);
        else if (line.rfind("# failed ", 0) == 0) out.failures.push_back(line.substr(2));
        continue;
      }
      if (cols.empty()) {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (hash.empty()) throw std::runtime_error(f.string() + " has no config hash");
        if (out.config_hash.empty()) {
          out.config_hash = hash;
          out.kind = kind;
          out.columns = cols;
        } else if (hash != out.config_hash) {
          throw std::runtime_error("config hash mismatch: " + f.string() + " has " + hash + ", expected " +
                                   out.config_hash);
        } else if (cols != out.columns) {
          throw std::runtime_error("column mismatch in " + f.string());
        }
        continue;
      }
      std::vector<double> row;
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) row.push_back(std::stod(c));
      if (row.size() != cols.size()) throw std::runtime_error("malformed row in " + f.string());
      const int cT = out.column("T"), ct = out.column("t");
      const auto key = std::make_tuple(static_cast<long long>(row[0]), cT >= 0 ? row[cT] : 0.0, ct >= 0 ? row[ct] : 0.0);
      if (!seen.insert(key).second)
        throw std::runtime_error("duplicate replica " + std::to_string(std::get<0>(key)) + " in " + f.string());
      out.rows.push_back(std::move(row));
    }
    if (cols.empty() && !hash.empty()) {
      if (out.config_hash.empty()) {
        out.config_hash = hash;
        out.kind = kind;
      } else if (hash != out.config_hash) {
        throw std::runtime_error("config hash mismatch: " + f.string());
      }
    }
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
  return out;
}

// ---------------------------------------------------------------------------
// Analysis

namespace {

void add(RunResult& r, const std::string& name, bool pass, const std::string& detail) {
  r.assertions.push_back({name, pass, detail});
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::optional<StableLimitLaw> limit_law(const ExperimentConfig& c, double t) {
  const Regime r = classify_regime(c.model).regime;
  if (r == Regime::Large) return large_limit_law(c.model, c.phi, t);
  if (r == Regime::Critical) return critical_limit_law(c.model, c.phi, t);
  return std::nullopt;
}

json describe_sample(const std::vector<double>& x) {
  if (x.empty()) return json{{"n", 0}};
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= std::max<double>(1.0, static_cast<double>(s.size()) - 1.0);
  auto q = [&](double p) { return s[static_cast<std::size_t>(p * static_cast<double>(s.size() - 1))]; };
  return json{{"n", s.size()}, {"mean", mean}, {"sd", std::sqrt(var)}, {"q05", q(0.05)}, {"median", q(0.5)},
              {"q95", q(0.95)}, {"min", s.front()}, {"max", s.back()}};
}

void analyze_fluctuation(const ExperimentConfig& c, const fs::path& dir, const Records& rec, RunResult& res) {
  json per_T = json::array();
  std::vector<double> dist;
  std::optional<CfDistance> last_cf;
  std::optional<IndexEstimate> last_idx;
  const auto law = limit_law(c, c.stats.t);
  if (!law) res.summary["law_note"] = "no limit law in this regime; cf_distance skipped";
  for (std::size_t i = 0; i < c.T.size(); ++i) {
    const double T = c.T[i];
    Sample s;
    s.values = rec.select("value", T, c.stats.t);
    s.meta.T = T;
    s.meta.t = c.stats.t;
    s.meta.phi_id = c.phi_id;
    s.meta.replicas = static_cast<std::int64_t>(s.values.size());
    json row{{"T", T}, {"F_T", norming_for(c, i)}, {"sample", describe_sample(s.values)}};
    const auto bias = rec.select("bias_bound", T, c.stats.t);
    if (!bias.empty()) row["bias_bound"] = bias.front();
    if (law && s.size() >= 100) {
      const double zmax = c.stats.z_max.value_or(std::pow(std::log(10.0) / law->scale, 1.0 / law->index));
      const auto z = symmetric_z_grid(zmax, c.stats.z_points);
      const CharFn cf = [&](double zz) { return law->cf(zz); };
      const CfDistance d = cf_distance(s, cf, z, c.seed ^ (0xc0ffeeULL + i), c.stats.resamples);
      row["cf_distance"] = d.distance;
      row["cf_threshold"] = d.threshold;
      row["cf_z_at_max"] = d.z_at_max;
      dist.push_back(d.distance);
      last_cf = d;
      const auto e = ecf(s.values, z);
      std::ofstream os(dir / ("ecf_T" + num(T) + ".csv"));
      os << std::setprecision(17) << "z,ecf_re,ecf_im,cf_re,cf_im\n";
      for (std::size_t k = 0; k < z.size(); ++k) {
        const auto l = law->cf(z[k]);
        os << z[k] << ',' << e[k].real() << ',' << e[k].imag() << ',' << l.real() << ',' << l.imag() << '\n';
      }
    }
    if (s.size() >= 10000) {
      const IndexEstimate e = stability_index_estimate(s, c.seed ^ (0xbeefULL + i), c.stats.resamples);
      row["index"] = json{{"ok", e.ok}, {"estimate", e.index}, {"ci", {e.ci_lo, e.ci_hi}}, {"scale", e.scale},
                          {"scale_ci", {e.scale_ci_lo, e.scale_ci_hi}}, {"message", e.message}};
      last_idx = e;
    } else {
      row["index"] = json{{"ok", false}, {"message", "index estimation needs n >= 10^4"}};
      last_idx.reset();
    }
    per_T.push_back(row);
  }
  res.summary["per_T"] = per_T;
  if (law) res.summary["limit_law"] = json{{"index", law->index}, {"scale_param", law->scale}, {"skew", law->skew},
                                           {"sigma", std::pow(law->scale, 1.0 / law->index)}};

  const auto& A = c.assertions;
  if (A.cf_distance_decreasing) {
    bool ok = dist.size() == c.T.size() && dist.size() >= 2;
    for (std::size_t i = 1; ok && i < dist.size(); ++i) ok = dist[i] < dist[i - 1];
    std::string d;
    for (double v : dist) d += num(v) + " ";
    add(res, "cf_distance_decreasing", ok, "distances " + d);
  }
  if (A.cf_below_threshold)
    add(res, "cf_below_threshold", last_cf && last_cf->below,
        last_cf ? "distance " + num(last_cf->distance) + " threshold " + num(last_cf->threshold) : "no sample");
  if (A.index_range) {
    const bool ok = last_idx && last_idx->ok && last_idx->index >= A.index_range->first &&
                    last_idx->index <= A.index_range->second;
    add(res, "index_range", ok, last_idx ? "estimate " + num(last_idx->index) + " " + last_idx->message : "n < 10^4");
  }
  if (A.scale_rel_tol) {
    bool ok = false;
    std::string d = "no estimate";
    if (last_idx && last_idx->ok && law) {
      const double sigma = std::pow(law->scale, 1.0 / law->index);
      const double rel = std::abs(last_idx->scale - sigma) / sigma;
      ok = rel <= *A.scale_rel_tol;
      d = "empirical " + num(last_idx->scale) + " law " + num(sigma) + " rel " + num(rel);
    }
    add(res, "scale_rel_tol", ok, d);
  }
  if (c.stats.increments.size() == 2 && !c.T.empty()) {
    const double T = c.T.back();
    auto incr = [&](std::pair<double, double> iv) {
      const auto a = rec.select("value", T, iv.first), b = rec.select("value", T, iv.second);
      std::vector<double> out(a.size());
      for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) out[k] = b[k] - a[k];
      return out;
    };
    const auto a = incr(c.stats.increments[0]), b = incr(c.stats.increments[1]);
    json ind{{"T", T}, {"n", a.size()}};
    std::optional<IndependenceStat> st;
    if (a.size() >= 100 && a.size() == b.size()) {
      const auto z = symmetric_z_grid(2.0, 4);
      st = increment_independence_stat(a, b, z, c.seed ^ 0x1dULL, c.stats.resamples);
      ind["stat"] = st->stat;
      ind["threshold"] = st->threshold;
    }
    res.summary["independence"] = ind;
    if (A.independence_below_threshold)
      add(res, "independence_below_threshold", st && st->below,
          st ? "stat " + num(st->stat) + " threshold " + num(st->threshold) : "fewer than 100 pairs");
  }
}

void analyze_tail(const ExperimentConfig& c, const fs::path& dir, const Records& rec, RunResult& res) {
  std::vector<IncrementGroup> groups;
  for (double T : c.T)
    for (const auto& [t1, t2] : c.stats.intervals) {
      IncrementGroup g{T, t1, t2, {}};
      const auto a = rec.select("value", T, t1), b = rec.select("value", T, t2);
      for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) g.values.push_back(b[k] - a[k]);
      groups.push_back(std::move(g));
    }
  const TailBoundReport rep = tail_bound_check(groups, c.stats.deltas, c.assertions.tail_slope_at_least.value_or(0.9),
                                               c.stats.min_exceed);
  std::ofstream os(dir / "tail_cells.csv");
  os << std::setprecision(17) << "T,t1,t2,delta,n,exceed,p_hat,bound_ratio,sparse\n";
  for (const auto& cell : rep.cells)
    os << cell.T << ',' << cell.t1 << ',' << cell.t2 << ',' << cell.delta << ',' << cell.n << ',' << cell.exceed << ','
       << cell.p_hat << ',' << cell.bound_ratio << ',' << cell.sparse << '\n';
  json slopes = json::array();
  for (const auto& s : rep.slopes) slopes.push_back({{"T", s.T}, {"delta", s.delta}, {"slope", s.slope}, {"points", s.points}});
  json cby = json::array();
  for (const auto& [T, C] : rep.C_by_T) cby.push_back({{"T", T}, {"C", C}});
  res.summary["tail"] = json{{"C", rep.C}, {"C_by_T", cby}, {"slopes", slopes}, {"min_slope", rep.min_slope},
                             {"sparse", rep.sparse}, {"warnings", rep.warnings}};
  if (c.assertions.tail_slope_at_least) {
    add(res, "tail_envelope", rep.envelope_ok, "C " + num(rep.C));
    add(res, "tail_slope", rep.slope_ok, "min slope " + num(rep.min_slope));
  }
}

void analyze_triangle(const ExperimentConfig& c, const fs::path& dir, const Records& rec, RunResult& res) {
  const double T = c.T[0], F = triangle_F(c);
  const Box box = triangle_box(c);
  const PsiProfile psi = triangle_psi(c);
  const LaplaceMcPlan plan = make_laplace_plan(c.model, psi, T, F, box, c.path_step);
  const auto vals = rec.select("value", NAN, NAN);
  double m = 0.0, s2 = 0.0;
  for (double v : vals) m += v;
  const double n = static_cast<double>(vals.size());
  if (n > 0) m /= n;
  for (double v : vals) s2 += (v - m) * (v - m);
  const double se = n > 1 ? std::sqrt(s2 / (n - 1) / n) : 0.0;

  SolverConfig cfg;
  cfg.half_width = c.triangle.half_width;
  cfg.dx = c.triangle.dx;
  cfg.dt = c.triangle.dt;
  cfg.box = box;
  const LaplaceRHS cont = laplace_rhs_with_error(c.model, psi, T, F, cfg);
  SolverConfig gcfg = cfg;
  gcfg.forcing.grid_step = c.path_step;
  for (const auto& sp : c.triangle.spot_points) gcfg.snapshot_times.push_back(sp.second);
  SolverConfig ccfg = cfg;
  ccfg.snapshot_times = gcfg.snapshot_times;
  const VTField gf = solve_vT(c.model, psi, T, F, gcfg);
  const LaplaceRHS grid = laplace_rhs(gf, c.model);
  const VTField cf = solve_vT(c.model, psi, T, F, ccfg);

  res.summary["triangle"] = json{
      {"T", T}, {"F_T", F}, {"box_half_width", box.hi[0]}, {"path_step", c.path_step},
      {"mc", {{"estimate", m}, {"stderr", se}, {"replicas", vals.size()}, {"centering", plan.centering},
              {"truncation_bias_bound", plan.bias_bound}}},
      {"solver_I_form", {{"value", cont.value_I}, {"uncertainty", cont.err_I}, {"I1", cont.I1}, {"I2", cont.I2}, {"I3", cont.I3}}},
      {"solver_direct_form", {{"value", cont.value_full}, {"uncertainty", cont.err_full}}},
      {"solver_box_form", {{"value", cont.value_box}, {"uncertainty", cont.err_box}}},
      {"solver_grid_box_form", {{"value", grid.value_box}, {"discretization_bias", grid.value_box - cont.value_box}}}};
  const double tol_sig = c.assertions.triangle_sigmas.value_or(3.0);
  if (c.assertions.triangle_sigmas) {
    const double gap = std::abs(m - cont.value_I);
    add(res, "triangle_mc_vs_I_form", n > 1 && gap <= tol_sig * (se + cont.err_I),
        "|" + num(m) + " - " + num(cont.value_I) + "| = " + num(gap) + " vs " + num(tol_sig * (se + cont.err_I)));
  }
  json spots = json::array();
  bool spots_ok = !c.triangle.spot_points.empty();
  std::string spot_detail;
  for (std::size_t i = 0; i < c.triangle.spot_points.size(); ++i) {
    const auto [x, t] = c.triangle.spot_points[i];
    const McEstimate o = vT_mc_oracle(c.model, x, t, psi, T, F, c.path_step, c.triangle.oracle_replicas,
                                      c.seed ^ (0x5a5aULL + i), c.threads);
    const double vg = gf.value(x, t), vc = cf.value(x, t);
    const double z = o.stderr_ > 0.0 ? (o.estimate - vg) / o.stderr_ : 0.0;
    spots.push_back({{"x", x}, {"t", t}, {"oracle", o.estimate}, {"stderr", o.stderr_}, {"solver_grid", vg},
                     {"solver_continuous", vc}, {"z", z}});
    const double k = c.assertions.oracle_sigmas.value_or(3.0);
    spots_ok = spots_ok && std::abs(o.estimate - vg) <= k * o.stderr_;
    spot_detail += "z=" + num(z) + " ";
  }
  res.summary["spot_points"] = spots;
  if (c.assertions.oracle_sigmas) add(res, "solver_vs_oracle", spots_ok, spot_detail);
  (void)dir;
}

void analyze_limits(const ExperimentConfig& c, const fs::path& dir, RunResult& res) {
  const Regime r = classify_regime(c.model).regime;
  LimitTable tab;
  if (r == Regime::Large) tab = deterministic_limit_I2(c.model, c.phi, c.psi, c.T);
  else if (r == Regime::Critical) tab = critical_log_limit(c.model, c.phi, c.T);
  else throw std::invalid_argument("deterministic limits need the large or critical regime");
  std::ofstream os(dir / "limits.csv");
  os << std::setprecision(17) << "T,value,abs_error,limit,rel_gap\n";
  json rows = json::array();
  for (const auto& row : tab.rows) {
    os << row.T << ',' << row.value.value << ',' << row.value.abs_error << ',' << row.limit << ',' << row.rel_gap << '\n';
    rows.push_back({{"T", row.T}, {"value", row.value.value}, {"abs_error", row.value.abs_error}, {"rel_gap", row.rel_gap}});
  }
  res.summary["limits"] = json{{"regime", std::string(to_string(r))}, {"limit", tab.limit.value},
                               {"limit_abs_error", tab.limit.abs_error}, {"rows", rows},
                               {"gap_decreasing", tab.gap_decreasing}, {"note", tab.note}};
  if (c.assertions.gap_decreasing) add(res, "gap_decreasing", tab.gap_decreasing, "");
  if (c.assertions.final_gap_below) {
    const double g = tab.rows.empty() ? INFINITY : tab.rows.back().rel_gap;
    add(res, "final_gap_below", g < *c.assertions.final_gap_below, "final gap " + num(g));
  }
}

void analyze_calibration(const ExperimentConfig& c, const fs::path& dir, RunResult& res) {
  const SkewedStableSpec law{c.calibration.index, 1.0, c.calibration.scale, 0.0};
  json out = json::array();
  std::ofstream os(dir / "calibration.csv");
  os << "test,n,runs,rejections,rate,nominal\n";
  auto record = [&](const CalibrationResult& r) {
    os << r.test << ',' << r.n << ',' << r.runs << ',' << r.rejections << ',' << r.rate() << ',' << r.nominal << '\n';
    out.push_back({{"test", r.test}, {"n", r.n}, {"runs", r.runs}, {"rejections", r.rejections}, {"rate", r.rate()}});
    if (c.assertions.calibration_band)
      add(res, "calibration_" + r.test, r.within(*c.assertions.calibration_band),
          "rate " + num(r.rate()) + " nominal " + num(r.nominal));
  };
  const double sigma = c.calibration.scale;
  const double zmax = std::pow(std::log(10.0), 1.0 / c.calibration.index) / sigma;
  for (const auto& t : c.calibration.tests) {
    if (t == "cf_distance") {
      const auto z = symmetric_z_grid(zmax, c.stats.z_points);
      record(calibrate_cf_distance(law, c.calibration.n, c.calibration.runs, z, c.seed, c.stats.resamples));
    } else if (t == "independence") {
      const auto z = symmetric_z_grid(2.0, 4);
      record(calibrate_independence(law, c.calibration.n, c.calibration.runs, z, c.seed + 1, c.stats.resamples));
    } else if (t == "index") {
      CalibrationResult r;
      r.test = "index";
      r.n = c.calibration.index_n;
      r.runs = c.calibration.index_runs;
      for (int k = 0; k < r.runs; ++k) {
        RandomStream rng(c.seed + 2, static_cast<std::uint64_t>(k));
        Sample s;
        s.values.resize(r.n);
        for (auto& v : s.values) v = sample_skewed_stable(law, rng);
        const IndexEstimate e = stability_index_estimate(s, c.seed ^ static_cast<std::uint64_t>(k), c.stats.resamples);
        if (!e.ok || law.index < e.ci_lo || law.index > e.ci_hi) ++r.rejections;
      }
      record(r);
    }
  }
  res.summary["calibration"] = out;
}

}  // namespace

RunResult analyze(const ExperimentConfig& c, const fs::path& dir) {
  RunResult res;
  res.dir = dir;
  const std::string hash = config_hash(c.raw);
  res.summary = json{{"name", c.name}, {"kind", std::string(to_string(c.kind))}, {"config_hash", hash},
                     {"regime", std::string(to_string(classify_regime(c.model).regime))}, {"replicas", c.replicas}};
  Records rec;
  if (c.kind == ExperimentKind::FluctuationLimit || c.kind == ExperimentKind::TailBound ||
      c.kind == ExperimentKind::LaplaceTriangle) {
    rec = aggregate(record_files(dir));
    if (!rec.config_hash.empty() && rec.config_hash != hash)
      throw std::runtime_error("records in " + dir.string() + " belong to config " + rec.config_hash);
    res.failures = static_cast<std::int64_t>(rec.failures.size());
    res.summary["records"] = rec.rows.size();
    res.summary["failures"] = rec.failures;
    std::ofstream fm(dir / "failures.csv");
    fm << "failure\n";
    for (const auto& f : rec.failures) fm << '"' << f << "\"\n";
  }
  switch (c.kind) {
    case ExperimentKind::FluctuationLimit: analyze_fluctuation(c, dir, rec, res); break;
    case ExperimentKind::TailBound: analyze_tail(c, dir, rec, res); break;
    case ExperimentKind::LaplaceTriangle: analyze_triangle(c, dir, rec, res); break;
    case ExperimentKind::DeterministicLimits: analyze_limits(c, dir, res); break;
    case ExperimentKind::Calibration: analyze_calibration(c, dir, res); break;
  }
  json as = json::array();
  for (const auto& a : res.assertions) as.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
  res.summary["assertions"] = as;
  res.summary["all_pass"] = res.all_pass();
  write_atomically(dir / "summary.json", res.summary.dump(2) + "\n");
  return res;
}

RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  const fs::path dir = opt.dir.value_or(artifact_dir(c));
  fs::create_directories(dir);
  const std::string hash = config_hash(c.raw);
  const fs::path cfg_path = dir / "config.json";
  if (fs::exists(cfg_path)) {
    std::ifstream in(cfg_path);
    json old;
    try {
      old = json::parse(in);
    } catch (const json::parse_error&) {
      throw std::runtime_error(cfg_path.string() + " is not valid JSON");
    }
    if (config_hash(old) != hash)
      throw std::runtime_error("artifact directory " + dir.string() + " holds a different configuration");
  }
  write_atomically(cfg_path, c.raw.dump(2) + "\n");
  const auto t0 = std::chrono::steady_clock::now();
  if (c.kind == ExperimentKind::FluctuationLimit || c.kind == ExperimentKind::TailBound) {
    const auto pts = prepare_occupation(c);
    run_shards(c, dir, hash, opt.resume, [&](std::int64_t lo, std::int64_t hi, std::int64_t& f) {
      return run_occupation_shard(c, pts, lo, hi, f);
    });
  } else if (c.kind == ExperimentKind::LaplaceTriangle) {
    const LaplaceMcPlan plan =
        make_laplace_plan(c.model, triangle_psi(c), c.T[0], triangle_F(c), triangle_box(c), c.path_step);
    run_shards(c, dir, hash, opt.resume, [&](std::int64_t lo, std::int64_t hi, std::int64_t& f) {
      return run_triangle_shard(c, plan, lo, hi, f);
    });
  }
  log::info("simulation finished in ",
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), " s");
  return analyze(c, dir);
}

}  // namespace occfluct
