// mfe_lab: command-line front end for the mean field equation toolkit.
//
//   mfe_lab solve    --alpha 0.32 --initial axisymmetric
//   mfe_lab branch   --branch trivial --alpha-min 0.15 --alpha-max 1.05
//   mfe_lab verify   --case zero-field --alpha 1/3
//   mfe_lab symmetry --field mfe_out/solution_axisymmetric.mfe
//
// Every option can also be given in a JSON config (--config, see mfe_lab.example.json) or
// as --set key=value. Precedence: config file, then named options, then --set.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mfe/commands.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> alpha, alpha_min, alpha_max, initial, verify_case, field, output_dir, branch;
  std::optional<int> seeds;
  std::optional<std::uint64_t> seed_base;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--set", o.sets, "override, key=value (repeatable)");
  cmd->add_option("--alpha", o.alpha, "coupling, decimal or fraction such as 1/3");
  cmd->add_option("--output-dir", o.output_dir, "output directory ($MFE_OUTPUT_DIR wins)");
  cmd->add_option("--field", o.field, "field file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for (alpha/2) Lap u + e^u - 1 = 0 on the sphere"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Newton-Krylov solves with symmetry reports");
  add_common(solve, o);
  solve->add_option("--seeds", o.seeds, "number of random starts");
  solve->add_option("--seed-base", o.seed_base, "first seed");
  solve->add_option("--initial", o.initial, "random | zero | axisymmetric | file");

  auto* branch = app.add_subcommand("branch", "continuation in alpha and singular values");
  add_common(branch, o);
  branch->add_option("--branch", o.branch, "trivial | nontrivial");
  branch->add_option("--alpha-min", o.alpha_min, "lower end of the alpha range");
  branch->add_option("--alpha-max", o.alpha_max, "upper end of the alpha range");

  auto* verify = app.add_subcommand("verify", "invariant checks");
  add_common(verify, o);
  verify->add_option("--case", o.verify_case, "zero-field | caps | field");

  auto* symmetry = app.add_subcommand("symmetry", "axis classes, field degree, critical points");
  add_common(symmetry, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfe::kExitConfig;
  }

  mfe::RunConfig config;
  try {
    if (!o.config_path.empty()) config = mfe::load_config(o.config_path);
    auto set = [&](const char* key, const auto& value) {
      if (value) mfe::set_config_value(config, key, *value);
    };
    set("alpha", o.alpha);
    set("alpha_min", o.alpha_min);
    set("alpha_max", o.alpha_max);
    set("initial", o.initial);
    set("case", o.verify_case);
    set("field_file", o.field);
    set("output_dir", o.output_dir);
    set("branch", o.branch);
    set("seeds", o.seeds);
    set("seed_base", o.seed_base);
    if (o.field && !o.initial && solve->parsed()) config.initial = "file";
    if (o.field && !o.verify_case && verify->parsed()) config.verify_case = "field";
    for (const auto& s : o.sets) mfe::apply_override(config, s);
  } catch (const mfe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfe::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return mfe::run_command(name, config, std::cerr);
}
