#pragma once

#include "occfluct/model.hpp"
#include "occfluct/occupation.hpp"
#include "occfluct/stable_numerics.hpp"
#include "occfluct/test_function.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace occfluct {

namespace fs = std::filesystem;

enum class ExperimentKind { FluctuationLimit, LaplaceTriangle, DeterministicLimits, TailBound, Calibration };
std::string_view to_string(ExperimentKind k);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NormingSpec {
  enum class Kind { Auto, Power, Values } kind = Kind::Auto;
  double exponent = 0.0;       // Power: F_T = T^exponent
  std::vector<double> values;  // Values: one per T
  bool continuous_intermediate = false;
};

struct AssertionSpec {
  bool cf_distance_decreasing = false;
  bool cf_below_threshold = false;
  std::optional<std::pair<double, double>> index_range;
  std::optional<double> scale_rel_tol;
  bool independence_below_threshold = false;
  std::optional<double> triangle_sigmas;
  std::optional<double> oracle_sigmas;
  bool gap_decreasing = false;
  std::optional<double> final_gap_below;
  std::optional<double> tail_slope_at_least;
  std::optional<double> calibration_band;
};

struct StatsSpec {
  double t = 1.0;                    // <X_T(t), phi> is the tested sample
  std::optional<double> z_max;       // default: |limit CF| = 0.1
  int z_points = 16;
  int resamples = 400;
  std::vector<std::pair<double, double>> increments;  // two intervals for the independence test
  std::vector<std::pair<double, double>> intervals;   // tail-bound intervals
  std::vector<double> deltas;
  std::int64_t min_exceed = 10;
};

struct TriangleSpec {
  double half_width = 8192.0, dx = 0.5, dt = 0.01;
  std::optional<double> F_T;  // default T^{1/(1+beta)}
  std::vector<std::pair<double, double>> spot_points;  // (x, t)
  std::int64_t oracle_replicas = 20000;
};

struct CalibrationSpec {
  double index = 1.5;
  double scale = 1.0;
  std::size_t n = 2000;
  int runs = 100;
  std::vector<std::string> tests = {"cf_distance", "independence", "index"};
  std::size_t index_n = 100000;
  int index_runs = 20;
};

struct ExperimentConfig {
  std::string name;
  ExperimentKind kind = ExperimentKind::FluctuationLimit;
  ModelParams model;
  std::optional<Regime> expect_regime;
  std::vector<double> T;
  std::int64_t replicas = 0;
  std::optional<double> box_half_width;
  double eps_trunc = 1e-3;
  TestFunction phi = TestFunction::gaussian(1, 1.0);
  std::string phi_id = "phi";
  TimeProfile psi = TimeProfile::constant(1.0);
  std::vector<double> t_grid = {0.0, 1.0};
  double path_step = 0.1;
  std::uint64_t seed = 1;
  std::string output_dir;
  int threads = 1;
  std::int64_t shard_size = 100;
  NormingSpec norming;
  Centering centering = Centering::Truncated;
  StatsSpec stats;
  TriangleSpec triangle;
  CalibrationSpec calibration;
  AssertionSpec assertions;
  nlohmann::json raw;
};

/// Parse and validate; throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const fs::path& file);

/// FNV-1a (64 bit, hex) of the canonical dump, without output_dir and threads.
std::string config_hash(const nlohmann::json& j);

/// Root for relative output directories: $OCCFLUCT_OUTPUT_ROOT, else "runs".
fs::path output_root();
fs::path artifact_dir(const ExperimentConfig& c);

double norming_for(const ExperimentConfig& c, std::size_t T_index);
double box_for(const ExperimentConfig& c, double horizon);

struct RunOptions {
  bool resume = true;
  std::optional<fs::path> dir;  // overrides artifact_dir
};

struct AssertionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunResult {
  fs::path dir;
  nlohmann::json summary;
  std::vector<AssertionResult> assertions;
  std::int64_t failures = 0;
  bool all_pass() const;
};

RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opt = {});

/// Merged record files of one configuration.
struct Records {
  std::string config_hash;
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> failures;

  int column(const std::string& name) const;  // -1 if absent
  /// Values of `value_col` on rows matching T and t (NaN skips the filter),
  /// ordered by replica id.
  std::vector<double> select(const std::string& value_col, double T, double t) const;
  std::vector<double> replica_ids(double T, double t) const;
};

/// Throws on config-hash mismatch or duplicate (replica, T, t) keys.
Records aggregate(const std::vector<fs::path>& files);
std::vector<fs::path> record_files(const fs::path& dir);

/// Recompute stats and assertions from the records in an artifact directory.
RunResult analyze(const ExperimentConfig& c, const fs::path& dir);

}  // namespace occfluct
