#include "mfe/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <vector>

#include "mfe/records.hpp"
#include "mfe/stereographic.hpp"
#include "mfe/symmetry.hpp"

namespace mfe {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path prepare_output(const RunConfig& config) {
  const fs::path dir = config.resolved_output_dir();
  fs::create_directories(dir);
  return dir;
}

// The configuration as embedded in records; the output location is left out so that runs
// into different directories produce identical records.
Record embedded_config(const RunConfig& config) {
  Record r = config_record(config);
  r.erase("output_dir");
  return r;
}

Record tolerances(const RunConfig& config) {
  return Record{{"newton_tol", config.newton_tol}, {"step_tol", config.step_tol}, {"max_iter", config.max_iter}};
}

Record outcome_record(const SolveOutcome& o, const RunConfig& config, const std::string& label) {
  Record r = record_header("solve_outcome", o.solution.grid());
  r["alpha"] = o.alpha;
  r["tolerances"] = tolerances(config);
  r["label"] = label;
  r["converged"] = o.converged;
  r["iterations"] = o.iterations;
  r["residual_norm"] = o.residual_norm;
  r["sup_norm"] = o.solution.sup_norm();
  r["spectral_tail"] = o.spectral_tail;
  r["resolved"] = o.resolved;
  r["kernel_dimension"] = o.kernel_dimension;
  r["smallest_singular_value"] = o.smallest_singular_value;
  r["center_of_mass"] = to_record(o.center_of_mass);
  r["config"] = embedded_config(config);
  return r;
}

Record symmetry_record(const SymmetryReport& s, const SphereField& u, double alpha, const std::string& label) {
  Record r = record_header("symmetry_report", u.grid());
  r["alpha"] = alpha;
  r["label"] = label;
  r["constant"] = s.constant;
  r["hypothesis_holds"] = s.hypothesis.holds;
  r["axes"] = static_cast<int>(s.axes.size());
  r["count_s2"] = s.hypothesis.count_s2;
  r["count_s1"] = s.hypothesis.count_s1;
  r["count_violation"] = s.hypothesis.count_violation;
  r["count_degenerate"] = s.hypothesis.count_degenerate;
  r["count_multi_zero"] = s.hypothesis.count_multi;
  Record violating = Record::array();
  for (const Vec3& y : s.hypothesis.violating_axes) violating.push_back(to_record(y));
  r["violating_axes"] = violating;
  r["best_reflection_axis"] = to_record(s.best_reflection_axis);
  r["best_reflection_defect"] = s.best_reflection_defect;
  if (s.rotation_axis) {
    r["rotation_axis"] = to_record(s.rotation_axis->axis);
    r["axis_deviation"] = s.rotation_axis->deviation;
    r["axisymmetric"] = s.rotation_axis->found && s.rotation_axis->deviation < 1e-5;
  } else {
    r["rotation_axis"] = nullptr;
    r["axis_deviation"] = nullptr;
    r["axisymmetric"] = true;
  }
  Record nodal = Record::array();
  for (auto [axis, count] : s.nodal_counts) nodal.push_back(Record{{"axis_index", axis}, {"regions", count}});
  r["nodal_counts"] = nodal;
  return r;
}

SymmetryOptions symmetry_options(const RunConfig& config) {
  SymmetryOptions o;
  o.axes = config.symmetry_axes;
  o.samples = config.symmetry_samples;
  return o;
}

SphereField axisymmetric_start(const RunConfig& config, double alpha, const GridPtr& grid) {
  Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
  init[2] = config.axisymmetric_amplitude;
  const AxisymmetricProfile profile = axisymmetric_solve(alpha, init);
  if (!profile.converged) throw Error("axisymmetric seed did not converge");
  return profile.lift(grid);
}

// --- verification helpers --------------------------------------------------------------

struct Check {
  std::string name;
  bool pass = false;
  double defect = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string note;
};

class CheckList {
 public:
  template <typename Fn>
  void run(const std::string& name, double tolerance, Fn&& fn) {
    const auto t0 = Clock::now();
    Check c;
    c.name = name;
    c.tolerance = tolerance;
    try {
      auto [pass, defect, note] = fn();
      c.pass = pass;
      c.defect = defect;
      c.note = note;
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      c.pass = false;
      c.defect = std::nan("");
      c.note = e.what();
    }
    c.seconds = seconds_since(t0);
    checks_.push_back(std::move(c));
  }

  const std::vector<Check>& checks() const { return checks_; }
  bool all_pass() const {
    for (const auto& c : checks_) {
      if (!c.pass) return false;
    }
    return true;
  }

 private:
  std::vector<Check> checks_;
};

struct CheckValue {
  bool pass;
  double defect;
  std::string note;
};

double hemisphere_identity_defect(const SphereField& u, double alpha, int axes) {
  double worst = 0.0;
  for (const Vec3& y : fibonacci_axes(axes)) {
    const auto exp_u = [](double v) { return std::exp(v); };
    const double lhs = hemisphere_integral(u, y, exp_u) - hemisphere_integral(u, -y, exp_u);
    worst = std::max(worst, std::abs(lhs - alpha * great_circle_flux(u, y)));
  }
  return worst;
}

void add_chain_checks(CheckList& list, const SphereField& u, double alpha, const RunConfig& config, bool zero) {
  const PlanarField w = chain_to_w(u, alpha);
  const auto samples = disk_samples(config.planar_radius);
  if (zero) {
    list.run("zero_field_exp_w", 1e-12, [&] {
      double worst = 0.0;
      for (const Vec2& y : samples) {
        const double d = 1.0 + y.squaredNorm();
        worst = std::max(worst, std::abs(std::exp(w(y)) - 8.0 / alpha / (d * d)));
      }
      return CheckValue{worst < 1e-12, worst, ""};
    });
  }
  list.run("w_at_origin", 1e-12, [&] {
    const double d = std::abs(w(Vec2::Zero()) - (u(Vec3(0, 0, -1)) + std::log(8.0 / alpha)));
    return CheckValue{d < 1e-12, d, "w(0) = u(south pole) + ln(8/alpha)"};
  });
  const double mass_tol = zero ? 1e-8 : 1e-6;
  list.run("total_mass", mass_tol, [&] {
    const double d = std::abs(total_mass(w) - 8.0 * kPi / alpha);
    return CheckValue{d < mass_tol, d, "int e^w dy = 8 pi / alpha"};
  });
  const double res_tol = zero ? 1e-9 : 1e-6;
  list.run("planar_residual", res_tol, [&] {
    const double d = planar_residual_check(w, samples);
    return CheckValue{d < res_tol, d, "|y| <= " + format_double(config.planar_radius)};
  });
  list.run("hemisphere_identity", 1e-5, [&] {
    const double d = hemisphere_identity_defect(u, alpha, config.hemisphere_axes);
    return CheckValue{d < 1e-5, d, std::to_string(config.hemisphere_axes) + " axes"};
  });
}

void add_cap_checks(CheckList& list) {
  const PlanarDomain unit = PlanarDomain::disk(Vec2::Zero(), 1.0);
  list.run("complementary_caps", 1e-6, [&] {
    double worst = 0.0;
    bool ok = true;
    for (double lambda : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0}) {
      const SciResult r = sci_check(cap_factor(lambda), cap_factor(1.0 / lambda), unit);
      worst = std::max(worst, std::abs(r.mass - 4.0 * kPi));
      // lambda = 1 pairs two identical hemispheres, outside the strict hypotheses
      ok = ok && r.verdict != SciResult::Verdict::Fails;
    }
    return CheckValue{ok && worst < 1e-6, worst, "|mass - 4 pi|"};
  });
  list.run("perturbed_pairs", 0.0, [&] {
    double least = std::numeric_limits<double>::infinity();
    bool ok = true;
    int count = 0;
    for (double lambda : {1.0, 1.5, 2.0, 3.0, 5.0}) {
      for (double k : {0.5, 0.7, 0.8, 0.9}) {
        const double mu = matching_curvature_scale(lambda, k);
        const SciResult r = sci_check(cap_factor(1.0 / lambda), curvature_factor(mu, k), unit);
        ok = ok && r.verdict == SciResult::Verdict::Holds;
        least = std::min(least, r.mass - 4.0 * kPi);
        ++count;
      }
    }
    return CheckValue{ok && least > 0.0, least, std::to_string(count) + " pairs, min(mass - 4 pi)"};
  });
  list.run("tiny_disk_inapplicable", 0.0, [&] {
    const SciResult r = sci_check(cap_factor(1.0), cap_factor(2.0), PlanarDomain::disk(Vec2::Zero(), 0.1));
    return CheckValue{r.verdict == SciResult::Verdict::Inapplicable, r.boundary_gap, r.reason};
  });
  list.run("disk_area_two_way", 1e-6, [&] {
    const PlanarDomain d = PlanarDomain::disk(Vec2(0.3, -0.2), 1.7);
    const double e = std::abs(d.planar_area() - d.pullback_area());
    return CheckValue{e < 1e-6, e, ""};
  });
  list.run("polygon_area_two_way", 1e-6, [&] {
    const PlanarDomain p = PlanarDomain::polygon({Vec2(0, 0), Vec2(2, 0), Vec2(2, 1), Vec2(0, 1.5)});
    const double e = std::abs(p.planar_area() - p.pullback_area());
    return CheckValue{e < 1e-6, e, ""};
  });
}

void add_reflection_checks(CheckList& list, const SphereField& u, double alpha) {
  list.run("reflected_pair_mass", 1e-4, [&] {
    double least = std::numeric_limits<double>::infinity();
    double excess = 0.0;
    int pairs = 0;
    bool ok = true;
    for (const Vec3& y : fibonacci_axes(500)) {
      if (pairs >= 8) break;
      if (reflection_defect(u, y) <= 1e-6) continue;
      const ReflectedPairs rp = reflected_pair_mass(u, alpha, y, 2);
      if (rp.symmetric) continue;
      ++pairs;
      for (double m : rp.masses) least = std::min(least, m - 8.0 * kPi);
      excess = std::max(excess, rp.total - rp.total_bound);
      ok = ok && !rp.inconclusive;
    }
    if (pairs == 0) return CheckValue{true, 0.0, "no nonsymmetric axis"};
    ok = ok && least >= -1e-4 && excess <= 1e-6;
    return CheckValue{ok, least, "min(region mass - 8 pi); total <= 8 pi / alpha"};
  });
}

void write_checks(const std::vector<Check>& checks, const fs::path& dir, const std::string& verify_case,
                  double alpha, const SphereGrid& grid, std::ostream& log) {
  RecordWriter out(dir / "verify.jsonl");
  for (const Check& c : checks) {
    Record r = record_header("verify_check", grid);
    r["case"] = verify_case;
    r["alpha"] = alpha;
    r["check"] = c.name;
    r["pass"] = c.pass;
    r["max_defect"] = c.defect;
    r["tolerance"] = c.tolerance;
    r["runtime_s"] = c.seconds;
    r["note"] = c.note;
    out.write(r);
    log << (c.pass ? "PASS " : "FAIL ") << c.name << "  defect " << format_double(c.defect) << "  ("
        << c.seconds << " s)" << (c.note.empty() ? "" : "  " + c.note) << '\n';
  }
}

}  // namespace

// --- solve -----------------------------------------------------------------------------

int cmd_solve(const RunConfig& config, std::ostream& log) {
  config.validate();
  const GridPtr grid = config.grid();
  const MfeParameters params = config.parameters();

  std::vector<SolveOutcome> outcomes;
  std::vector<std::string> labels;
  if (config.initial == "random") {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < config.seeds; ++i) seeds.push_back(config.seed_base + static_cast<std::uint64_t>(i));
    outcomes = multi_start(grid, params, seeds, config.max_degree, config.scale);
    for (auto s : seeds) labels.push_back("seed" + std::to_string(s));
  } else {
    SphereField start = SphereField::zero(grid);
    if (config.initial == "axisymmetric") start = axisymmetric_start(config, config.alpha, grid);
    if (config.initial == "file") start = load_field(config.field_file);
    outcomes.push_back(solve_newton(start, params));
    labels.push_back(config.initial);
  }

  const fs::path dir = prepare_output(config);
  RecordWriter summary(dir / "solve.jsonl");
  RecordWriter symmetry(dir / "symmetry.jsonl");
  CsvWriter table(dir / "solve.csv", {"label", "alpha", "converged", "iterations", "residual_norm", "sup_norm",
                                       "spectral_tail", "hypothesis_holds", "axis_deviation"});
  bool diverged = false;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const SolveOutcome& o = outcomes[i];
    Record r = outcome_record(o, config, labels[i]);
    if (config.write_fields) {
      const std::string name = "solution_" + labels[i] + ".mfe";
      save_field((dir / name).string(), o.solution);
      r["field_file"] = name;
    }
    summary.write(r);
    diverged = diverged || !o.converged;

    std::string holds = "", deviation = "";
    if (o.converged) {
      const SymmetryReport report = symmetry_report(o.solution, symmetry_options(config));
      symmetry.write(symmetry_record(report, o.solution, o.alpha, labels[i]));
      holds = report.hypothesis.holds ? "1" : "0";
      deviation = report.rotation_axis ? format_double(report.rotation_axis->deviation) : "0";
    }
    table.row({labels[i], format_double(o.alpha), o.converged ? "1" : "0", std::to_string(o.iterations),
               format_double(o.residual_norm), format_double(o.solution.sup_norm()), format_double(o.spectral_tail),
               holds, deviation});
    log << labels[i] << ": " << (o.converged ? "converged" : "diverged") << " after " << o.iterations
        << " iterations, residual " << format_double(o.residual_norm) << ", sup " << format_double(o.solution.sup_norm())
        << (o.resolved ? "" : " (unresolved)") << '\n';
  }
  return diverged ? kExitFailure : kExitOk;
}

// --- branch ----------------------------------------------------------------------------

int cmd_branch(const RunConfig& config, std::ostream& log) {
  config.validate();
  const GridPtr grid = config.grid();
  const fs::path dir = prepare_output(config);

  std::vector<SolutionBranch> branches;
  CsvWriter singular(dir / "singular.csv", {"source", "alpha", "smallest_singular_value", "kernel_dimension"});
  RecordWriter records(dir / "branch.jsonl");

  if (config.branch == "trivial") {
    const BifurcationScan scan = bifurcation_scan(config.alpha_min, config.alpha_max, config.scan_samples, grid);
    CsvWriter scan_csv(dir / "scan.csv", {"alpha", "smallest_singular_value"});
    for (std::size_t i = 0; i < scan.alphas.size(); ++i) {
      scan_csv.row_numbers({scan.alphas[i], scan.smallest_singular_values[i]});
    }
    for (const SingularPoint& z : scan.zeros) {
      singular.row({"scan", format_double(z.alpha), format_double(z.smallest_singular_value),
                    std::to_string(z.kernel_dimension)});
      Record r = record_header("singular_alpha", *grid);
      r["source"] = "scan";
      r["alpha"] = z.alpha;
      r["smallest_singular_value"] = z.smallest_singular_value;
      r["kernel_dimension"] = z.kernel_dimension;
      records.write(r);
      log << "singular alpha " << format_double(z.alpha) << " (kernel dimension " << z.kernel_dimension << ")\n";
    }
    MfeParameters p = config.parameters();
    p.alpha = config.alpha_min;
    const SolveOutcome seed = solve_newton(SphereField::zero(grid), p);
    branches.push_back(continue_branch(seed, config.alpha_max, config.step_control(), p, 0));
  } else {
    MfeParameters p = config.parameters();
    p.alpha = config.seed_alpha;
    const SolveOutcome seed = solve_newton(axisymmetric_start(config, config.seed_alpha, grid), p);
    if (!seed.converged) {
      log << "nontrivial seed at alpha " << format_double(config.seed_alpha) << " did not converge\n";
      return kExitFailure;
    }
    branches.push_back(continue_branch(seed, config.alpha_min, config.step_control(), p, 0));
    branches.push_back(continue_branch(seed, config.alpha_max, config.step_control(), p, 1));
  }

  CsvWriter points(dir / "branch.csv", {"branch", "index", "alpha", "sup_norm", "residual_norm", "negative_eigenvalues",
                                        "smallest_singular_value", "axis_deviation"});
  for (const SolutionBranch& b : branches) {
    for (std::size_t i = 0; i < b.points.size(); ++i) {
      const SolveOutcome& o = b.points[i].outcome;
      double deviation = 0.0;
      if (o.solution.sup_norm() > 1e-6) deviation = detect_axis(o.solution).deviation;
      Record r = record_header("branch_point", o.solution.grid());
      r["branch"] = b.branch_id;
      r["index"] = static_cast<int>(i);
      r["alpha"] = o.alpha;
      r["tolerances"] = tolerances(config);
      r["converged"] = o.converged;
      r["sup_norm"] = o.solution.sup_norm();
      r["residual_norm"] = o.residual_norm;
      r["negative_eigenvalues"] = b.points[i].negative_eigenvalues;
      r["smallest_singular_value"] = o.smallest_singular_value;
      r["axis_deviation"] = deviation;
      records.write(r);
      points.row({std::to_string(b.branch_id), std::to_string(i), format_double(o.alpha),
                  format_double(o.solution.sup_norm()), format_double(o.residual_norm),
                  std::to_string(b.points[i].negative_eigenvalues), format_double(o.smallest_singular_value),
                  format_double(deviation)});
    }
    for (const BranchEvent& e : b.events) {
      singular.row({"branch" + std::to_string(b.branch_id) + ":" + to_string(e.kind), format_double(e.alpha_estimate),
                    format_double(e.smallest_singular_value), ""});
      Record r = record_header("branch_event", *grid);
      r["branch"] = b.branch_id;
      r["event"] = to_string(e.kind);
      r["alpha_lo"] = e.alpha_lo;
      r["alpha_hi"] = e.alpha_hi;
      r["alpha_estimate"] = e.alpha_estimate;
      r["smallest_singular_value"] = e.smallest_singular_value;
      records.write(r);
      log << "branch " << b.branch_id << ": " << to_string(e.kind) << " near alpha " << format_double(e.alpha_estimate)
          << '\n';
    }
    log << "branch " << b.branch_id << ": " << b.points.size() << " points, " << b.termination << '\n';
  }
  return kExitOk;
}

// --- verify ----------------------------------------------------------------------------

int cmd_verify(const RunConfig& config, std::ostream& log) {
  config.validate();
  CheckList list;
  GridPtr grid = config.grid();
  if (config.verify_case == "zero-field") {
    add_chain_checks(list, SphereField::zero(grid), config.alpha, config, true);
  } else if (config.verify_case == "caps") {
    add_cap_checks(list);
  } else {
    if (!fs::exists(config.field_file)) throw ConfigError("key 'field_file': no such file " + config.field_file);
    const SphereField u = load_field(config.field_file);
    grid = u.grid_ptr();
    list.run("equation_residual", 1e-8, [&] {
      const double r = residual(u, config.alpha).sup_norm();
      return CheckValue{r < 1e-8, r, "sup |(alpha/2) Lap u + e^u - 1|"};
    });
    add_chain_checks(list, u, config.alpha, config, false);
    add_reflection_checks(list, u, config.alpha);
  }
  write_checks(list.checks(), prepare_output(config), config.verify_case, config.alpha, *grid, log);
  return list.all_pass() ? kExitOk : kExitFailure;
}

// --- symmetry --------------------------------------------------------------------------

int cmd_symmetry(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.field_file.empty()) throw ConfigError("key 'field_file': required for symmetry");
  if (!fs::exists(config.field_file)) throw ConfigError("key 'field_file': no such file " + config.field_file);
  const SphereField u = load_field(config.field_file);
  const SymmetryReport report = symmetry_report(u, symmetry_options(config));

  const fs::path dir = prepare_output(config);
  RecordWriter out(dir / "symmetry.jsonl");
  Record r = symmetry_record(report, u, config.alpha, fs::path(config.field_file).filename().string());
  const CriticalPairResult critical = antipodal_critical_pair(u);
  r["critical_degenerate"] = critical.degenerate;
  r["critical_pairs"] = static_cast<int>(critical.pairs.size());
  if (!critical.pairs.empty()) r["critical_pair"] = to_record(critical.pairs.front().point);
  const DegreeResult degree = field_degree(u, 3, config.symmetry_samples);
  r["field_defined"] = degree.defined;
  r["field_degree"] = degree.degree;
  r["field_matches_euler_characteristic"] = degree.matches_euler_characteristic;
  out.write(r);

  CsvWriter axes(dir / "axes.csv", {"x", "y", "z", "class", "zeros", "F_x", "F_y", "F_z", "reflection_defect"});
  for (const AxisRecord& a : report.axes) {
    const bool has_f = a.field.status == FieldValue::Status::Defined;
    axes.row({format_double(a.axis[0]), format_double(a.axis[1]), format_double(a.axis[2]), to_string(a.axis_class),
              std::to_string(a.zeros.size()), has_f ? format_double(a.field.value[0]) : "",
              has_f ? format_double(a.field.value[1]) : "", has_f ? format_double(a.field.value[2]) : "",
              format_double(a.defect)});
  }
  log << "hypothesis (H) " << (report.hypothesis.holds ? "holds" : "fails") << " on " << report.axes.size()
      << " axes (S2 " << report.hypothesis.count_s2 << ", S1 " << report.hypothesis.count_s1 << ", violations "
      << report.hypothesis.count_violation << ", degenerate " << report.hypothesis.count_degenerate << ", multi "
      << report.hypothesis.count_multi << ")\n";
  if (report.rotation_axis) {
    log << "axis deviation " << format_double(report.rotation_axis->deviation) << '\n';
  }
  log << "field degree " << (degree.defined ? std::to_string(degree.degree) : "undefined") << '\n';
  return kExitOk;
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& log) {
  try {
    if (name == "solve") return cmd_solve(config, log);
    if (name == "branch") return cmd_branch(config, log);
    if (name == "verify") return cmd_verify(config, log);
    if (name == "symmetry") return cmd_symmetry(config, log);
    log << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    log << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace mfe
