#include "mfe/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace mfe {

namespace {

using nlohmann::json;

struct Field {
  std::string name;
  std::function<void(RunConfig&, const json&)> set;
  std::function<nlohmann::ordered_json(const RunConfig&)> get;
};

template <typename T>
T convert(const std::string& key, const json& v) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<std::int64_t>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': value " + v.dump() + " has the wrong type");
  }
}

template <typename T>
Field field(const std::string& name, T RunConfig::*member) {
  return {name, [name, member](RunConfig& c, const json& v) { c.*member = convert<T>(name, v); },
          [member](const RunConfig& c) { return nlohmann::ordered_json(c.*member); }};
}

Field alpha_field(const std::string& name, double RunConfig::*member) {
  return {name,
          [name, member](RunConfig& c, const json& v) {
            if (v.is_string()) {
              try {
                c.*member = parse_alpha(v.get<std::string>());
              } catch (const ConfigError&) {
                throw ConfigError("key '" + name + "': cannot read " + v.dump() + " as a number");
              }
            } else {
              c.*member = convert<double>(name, v);
            }
          },
          [member](const RunConfig& c) { return nlohmann::ordered_json(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      alpha_field("alpha", &RunConfig::alpha),
      field("bandlimit", &RunConfig::bandlimit),
      field("n_theta", &RunConfig::n_theta),
      field("n_phi", &RunConfig::n_phi),
      field("newton_tol", &RunConfig::newton_tol),
      field("step_tol", &RunConfig::step_tol),
      field("max_iter", &RunConfig::max_iter),
      field("output_dir", &RunConfig::output_dir),
      field("seeds", &RunConfig::seeds),
      field("seed_base", &RunConfig::seed_base),
      field("initial", &RunConfig::initial),
      field("field_file", &RunConfig::field_file),
      field("max_degree", &RunConfig::max_degree),
      field("scale", &RunConfig::scale),
      field("axisymmetric_amplitude", &RunConfig::axisymmetric_amplitude),
      field("symmetry_axes", &RunConfig::symmetry_axes),
      field("symmetry_samples", &RunConfig::symmetry_samples),
      field("write_fields", &RunConfig::write_fields),
      field("branch", &RunConfig::branch),
      alpha_field("alpha_min", &RunConfig::alpha_min),
      alpha_field("alpha_max", &RunConfig::alpha_max),
      field("scan_samples", &RunConfig::scan_samples),
      alpha_field("seed_alpha", &RunConfig::seed_alpha),
      field("step_initial", &RunConfig::step_initial),
      field("step_max", &RunConfig::step_max),
      field("step_min", &RunConfig::step_min),
      field("max_points", &RunConfig::max_points),
      field("monitor_degree", &RunConfig::monitor_degree),
      field("case", &RunConfig::verify_case),
      field("hemisphere_axes", &RunConfig::hemisphere_axes),
      field("planar_radius", &RunConfig::planar_radius),
  };
  return table;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("key '" + key + "': " + what);
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (v == o) return true;
  }
  return false;
}

}  // namespace

void RunConfig::validate() const {
  auto alpha_ok = [](double a) { return a > 0.0 && a <= 1.1; };
  require(alpha_ok(alpha), "alpha", "must lie in (0, 1.1]");
  require(alpha_ok(alpha_min), "alpha_min", "must lie in (0, 1.1]");
  require(alpha_ok(alpha_max), "alpha_max", "must lie in (0, 1.1]");
  require(alpha_min < alpha_max, "alpha_min", "empty alpha range (alpha_min >= alpha_max)");
  require(alpha_ok(seed_alpha), "seed_alpha", "must lie in (0, 1.1]");
  require(bandlimit >= 1, "bandlimit", "must be at least 1");
  require(n_theta >= bandlimit + 1, "n_theta", "must be at least bandlimit + 1");
  require(n_phi >= 2 * bandlimit + 1, "n_phi", "must be at least 2 bandlimit + 1");
  require(newton_tol > 0.0, "newton_tol", "must be positive");
  require(step_tol > 0.0, "step_tol", "must be positive");
  require(max_iter >= 1, "max_iter", "must be positive");
  require(!output_dir.empty(), "output_dir", "must not be empty");
  require(seeds >= 1, "seeds", "must be positive");
  require(one_of(initial, {"random", "zero", "axisymmetric", "file"}), "initial",
          "must be random, zero, axisymmetric or file");
  require(initial != "file" || !field_file.empty(), "field_file", "required when initial is file");
  require(max_degree >= 1, "max_degree", "must be positive");
  require(scale > 0.0, "scale", "must be positive");
  require(symmetry_axes >= 500, "symmetry_axes", "must be at least 500");
  require(symmetry_samples >= 128, "symmetry_samples", "must be at least 128");
  require(one_of(branch, {"trivial", "nontrivial"}), "branch", "must be trivial or nontrivial");
  require(scan_samples >= 2, "scan_samples", "must be at least 2");
  require(step_initial > 0.0, "step_initial", "must be positive");
  require(step_max >= step_initial, "step_max", "must be at least step_initial");
  require(step_min > 0.0 && step_min <= step_initial, "step_min", "must lie in (0, step_initial]");
  require(max_points >= 2, "max_points", "must be at least 2");
  require(monitor_degree >= 1 && monitor_degree <= bandlimit, "monitor_degree", "must lie in [1, bandlimit]");
  require(one_of(verify_case, {"zero-field", "caps", "field"}), "case", "must be zero-field, caps or field");
  require(verify_case != "field" || !field_file.empty(), "field_file", "required for the field case");
  require(hemisphere_axes >= 1, "hemisphere_axes", "must be positive");
  require(planar_radius > 0.0, "planar_radius", "must be positive");
}

MfeParameters RunConfig::parameters() const {
  MfeParameters p;
  p.alpha = alpha;
  p.newton_tol = newton_tol;
  p.step_tol = step_tol;
  p.max_iter = max_iter;
  return p;
}

StepControl RunConfig::step_control() const {
  StepControl s;
  s.initial = step_initial;
  s.max = step_max;
  s.min = step_min;
  s.max_points = max_points;
  s.monitor_degree = monitor_degree;
  return s;
}

GridPtr RunConfig::grid() const { return shared_grid(bandlimit, n_theta, n_phi); }

std::filesystem::path RunConfig::resolved_output_dir() const {
  if (const char* env = std::getenv("MFE_OUTPUT_DIR"); env && *env) return env;
  return output_dir;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.name);
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const nlohmann::json& value) {
  for (const auto& f : fields()) {
    if (f.name == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

void apply_config(RunConfig& config, const nlohmann::json& object) {
  if (!object.is_object()) throw ConfigError("configuration must be a JSON object");
  for (auto it = object.begin(); it != object.end(); ++it) set_config_value(config, it.key(), it.value());
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  RunConfig config;
  apply_config(config, j);
  return config;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_config_value(config, key, value);
}

double parse_alpha(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::istringstream in(s);
    double x;
    if (!(in >> x) || !(in >> std::ws).eof()) throw ConfigError("cannot read '" + text + "' as a number");
    return x;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return number(text);
  const double den = number(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("cannot read '" + text + "' as a number");
  return number(text.substr(0, slash)) / den;
}

nlohmann::ordered_json config_record(const RunConfig& config) {
  nlohmann::ordered_json r = nlohmann::ordered_json::object();
  for (const auto& f : fields()) r[f.name] = f.get(config);
  return r;
}

}  // namespace mfe
