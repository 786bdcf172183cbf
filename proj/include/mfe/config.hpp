#pragma once

// Run configuration for the command-line front end. Read from a JSON file (comments allowed)
// and then overridden key by key from the command line. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfe/errors.hpp"
#include "mfe/mfe_core.hpp"
#include "mfe/solver.hpp"

namespace mfe {

/// Bad configuration; the message names the offending key.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct RunConfig {
  // shared
  double alpha = 0.5;
  int bandlimit = SphereGrid::kDefaultBandlimit;
  int n_theta = SphereGrid::kDefaultNTheta;
  int n_phi = SphereGrid::kDefaultNPhi;
  double newton_tol = 1e-10;
  double step_tol = 1e-9;
  int max_iter = 100;
  std::string output_dir = "mfe_out";

  // solve
  int seeds = 1;
  std::uint64_t seed_base = 0;
  std::string initial = "random";  // random | zero | axisymmetric | file
  std::string field_file;
  int max_degree = 8;
  double scale = 0.3;
  /// Amplitude of P_2 in the axisymmetric initial guess.
  double axisymmetric_amplitude = -0.5;
  int symmetry_axes = 1000;
  int symmetry_samples = 256;
  bool write_fields = true;

  // branch
  std::string branch = "trivial";  // trivial | nontrivial
  double alpha_min = 0.15;
  double alpha_max = 1.05;
  int scan_samples = 901;
  /// Where the nontrivial branch is seeded (it is continued to alpha_min and alpha_max).
  double seed_alpha = 0.32;
  double step_initial = 0.01;
  double step_max = 0.05;
  double step_min = 1e-5;
  int max_points = 2000;
  int monitor_degree = 8;

  // verify
  std::string verify_case = "zero-field";  // zero-field | caps | field
  int hemisphere_axes = 200;
  double planar_radius = 10.0;

  /// Throws ConfigError for out-of-range values.
  void validate() const;

  MfeParameters parameters() const;
  StepControl step_control() const;
  GridPtr grid() const;
  /// output_dir, replaced by $MFE_OUTPUT_DIR when that is set and non-empty.
  std::filesystem::path resolved_output_dir() const;
};

/// Names of all accepted keys.
std::vector<std::string> config_keys();

/// Sets one key; throws ConfigError for unknown keys or values of the wrong type.
void set_config_value(RunConfig& config, const std::string& key, const nlohmann::json& value);

/// Applies every member of a JSON object.
void apply_config(RunConfig& config, const nlohmann::json& object);

/// Reads a JSON config file. Throws ConfigError when it is missing or malformed.
RunConfig load_config(const std::filesystem::path& path);

/// "key=value"; the value is read as JSON when it parses, otherwise as a string.
void apply_override(RunConfig& config, const std::string& assignment);

/// Accepts decimals and fractions such as "1/3".
double parse_alpha(const std::string& text);

/// The effective configuration as a record (all keys, fixed order).
nlohmann::ordered_json config_record(const RunConfig& config);

}  // namespace mfe
