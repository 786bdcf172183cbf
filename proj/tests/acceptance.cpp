// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 when any criterion fails.
//
//   acceptance            all criteria
//   acceptance 3 7        selected criteria

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfe/commands.hpp"
#include "mfe/mfe_core.hpp"
#include "mfe/solver.hpp"
#include "mfe/stereographic.hpp"
#include "mfe/symmetry.hpp"

using namespace mfe;
namespace fs = std::filesystem;

namespace {

const double kPi = std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

MfeParameters at(double alpha) {
  MfeParameters p;
  p.alpha = alpha;
  return p;
}

// Nontrivial axisymmetric solution from the 1-D oracle, or nothing if the start falls to zero.
std::optional<SphereField> branch_solution(double alpha, double a2, const Vec3& axis) {
  Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
  init[2] = a2;
  const AxisymmetricProfile p = axisymmetric_solve(alpha, init);
  if (!p.converged || std::abs(p.legendre[2]) < 0.1) return std::nullopt;
  const SolveOutcome o = solve_newton(p.lift(shared_grid(), axis), at(alpha));
  if (!o.converged) return std::nullopt;
  return o.solution;
}

// Converged, resolved, pairwise distinct outcomes of a few random starts plus extra fields.
std::vector<SphereField> solutions_at(double alpha, int seeds, std::vector<SphereField> extra = {}) {
  std::vector<std::uint64_t> list;
  for (int s = 0; s < seeds; ++s) list.push_back(1000 + s);
  std::vector<SphereField> out = std::move(extra);
  for (const SolveOutcome& o : multi_start(shared_grid(), at(alpha), list)) {
    if (!o.converged || !o.resolved) continue;
    bool fresh = true;
    for (const auto& s : out) fresh = fresh && (s - o.solution).sup_norm() > 1e-6;
    if (fresh) out.push_back(o.solution);
  }
  return out;
}

bool is_constant(const SphereField& u) { return u.coeffs().tail(u.coeffs().size() - 1).cwiseAbs().maxCoeff() < 1e-14; }

// --- criteria --------------------------------------------------------------------------

Verdict spectral() {
  const GridPtr g = shared_grid();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  double roundtrip = 0.0;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd c(g->coefficient_count());
    for (auto& x : c) x = n(rng);
    const Eigen::VectorXd v = g->synthesize(c);
    roundtrip = std::max(roundtrip, (g->analyze(v) - c).cwiseAbs().maxCoeff());
  }
  double eigen = 0.0;
  for (int k = 0; k <= 16; ++k)
    for (int m = -k; m <= k; ++m) {
      const SphereField y = SphereField::harmonic(g, k, m);
      eigen = std::max(eigen, (laplace_beltrami(y) + y * (k * (k + 1.0))).sup_norm());
    }
  return {roundtrip < 1e-12 && eigen < 1e-10, "roundtrip " + fmt("%.2e", roundtrip) + ", eigenrelation " + fmt("%.2e", eigen)};
}

Verdict zero_chain() {
  double pointwise = 0.0, mass = 0.0;
  for (double alpha : {1.0 / 6.0, 1.0 / 3.0, 0.5, 1.0}) {
    const PlanarField w = chain_to_w(SphereField::zero(shared_grid()), alpha);
    for (const Vec2& y : disk_samples(10.0))
      pointwise = std::max(pointwise, std::abs(std::exp(w(y)) - (8 / alpha) / std::pow(1 + y.squaredNorm(), 2)));
    mass = std::max(mass, std::abs(total_mass(w) - 8 * kPi / alpha));
  }
  return {pointwise < 1e-12 && mass < 1e-8, "max |e^w - exact| " + fmt("%.2e", pointwise) + ", |mass - 8 pi/alpha| " + fmt("%.2e", mass)};
}

Verdict planar_residual() {
  double worst = 0.0;
  int count = 0;
  const auto samples = disk_samples(10.0);
  for (double alpha : {0.32, 0.5, 0.9}) {
    std::vector<SphereField> extra{SphereField::zero(shared_grid())};
    if (alpha == 0.32) {
      if (auto s = branch_solution(0.32, -0.5, Vec3(0.3, -0.5, 0.8).normalized())) extra.push_back(*s);
      const std::vector<SphereField> known{SphereField::zero(shared_grid())};
      const SolveOutcome d = deflated_solve(random_field(shared_grid(), 1, 4, 0.03), at(0.32), known);
      if (d.converged && d.resolved && !d.exhausted) extra.push_back(d.solution);
    }
    for (const SphereField& u : solutions_at(alpha, 4, extra)) {
      worst = std::max(worst, planar_residual_check(chain_to_w(u, alpha), samples));
      ++count;
    }
  }
  return {worst < 1e-6, std::to_string(count) + " solutions, max defect " + fmt("%.2e", worst)};
}

Verdict bifurcation() {
  const BifurcationScan scan = bifurcation_scan(0.15, 1.05, 901, shared_grid());
  const double expected[] = {1.0 / 6.0, 1.0 / 3.0, 1.0};
  bool ok = scan.zeros.size() == 3;
  double offset = 0.0, sv = 0.0;
  for (std::size_t i = 0; ok && i < 3; ++i) {
    offset = std::max(offset, std::abs(scan.zeros[i].alpha - expected[i]));
    sv = std::max(sv, scan.zeros[i].smallest_singular_value);
  }
  ok = ok && offset < 1e-6 && sv < 1e-8;
  return {ok, std::to_string(scan.zeros.size()) + " singular alphas, max offset " + fmt("%.2e", offset) +
                  ", max singular value " + fmt("%.2e", sv)};
}

Verdict rigidity() {
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < 50; ++s) seeds.push_back(s);
  const auto axes = fibonacci_axes(500);
  int converged = 0, small = 0, h_fails = 0, counterexamples = 0;
  double largest = 0.0;
  for (const SolveOutcome& o : multi_start(shared_grid(), at(1.0 / 3.0), seeds)) {
    if (!o.converged) continue;
    ++converged;
    const double sup = o.solution.sup_norm();
    if (sup < 1e-6) {
      ++small;
      largest = std::max(largest, sup);
      continue;
    }
    if (!check_hypothesis_H(o.solution, axes).holds) {
      ++h_fails;
      continue;
    }
    ++counterexamples;
  }
  return {counterexamples == 0 && converged > 0,
          std::to_string(converged) + "/50 converged: " + std::to_string(small) + " with sup < 1e-6 (largest " +
              fmt("%.1e", largest) + "), " + std::to_string(h_fails) + " failing (H), " + std::to_string(counterexamples) +
              " counterexamples"};
}

// Solutions used by criteria 6, 7 and 9, built once.
struct Library {
  std::vector<std::pair<double, SphereField>> fields;
  double oracle = 0.0;
};

const Library& library() {
  static const Library lib = [] {
    Library l;
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    // a2 on the nontrivial branch: negative below 1/3, positive above
    const std::pair<double, double> starts[] = {{0.32, -0.5}, {0.35, 0.35}, {0.4, 1.3}};
    for (const auto& [alpha, a2] : starts) {
      Eigen::VectorXd init = Eigen::VectorXd::Zero(3);
      init[2] = a2;
      const AxisymmetricProfile p = axisymmetric_solve(alpha, init);
      if (!p.converged || std::abs(p.legendre[2]) < 0.1) continue;
      const SphereField lifted = p.lift(shared_grid(), axis);
      const SolveOutcome o = solve_newton(lifted, at(alpha));
      if (!o.converged) continue;
      l.oracle = std::max(l.oracle, (o.solution - lifted).sup_norm());
      l.fields.emplace_back(alpha, o.solution);
    }
    return l;
  }();
  return lib;
}

Verdict axial_symmetry() {
  const auto axes = fibonacci_axes(500);
  double worst = 0.0;
  int tested = 0, skipped = 0;
  for (double alpha : {0.35, 0.4, 0.5, 0.75}) {
    std::vector<SphereField> extra;
    for (const auto& [a, u] : library().fields)
      if (a == alpha) extra.push_back(u);
    for (const SphereField& u : solutions_at(alpha, 4, extra)) {
      if (is_constant(u)) {
        ++tested;
        continue;
      }
      if (!check_hypothesis_H(u, axes).holds) {
        ++skipped;
        continue;
      }
      worst = std::max(worst, detect_axis(u).deviation);
      ++tested;
    }
  }
  const double oracle = library().oracle;
  return {worst < 1e-5 && oracle < 1e-8 && !library().fields.empty(),
          std::to_string(tested) + " (H) solutions, max deviation " + fmt("%.2e", worst) + ", " + std::to_string(skipped) +
              " not (H); 1-D oracle agreement " + fmt("%.2e", oracle)};
}

Verdict hemisphere_identity() {
  std::vector<std::pair<double, SphereField>> fields = library().fields;
  fields.emplace_back(0.5, SphereField::zero(shared_grid()));
  const auto exp_u = [](double v) { return std::exp(v); };
  double worst = 0.0;
  for (const auto& [alpha, u] : fields) {
    for (const Vec3& y : fibonacci_axes(200)) {
      const double lhs = hemisphere_integral(u, y, exp_u) - hemisphere_integral(u, -y, exp_u);
      worst = std::max(worst, std::abs(lhs - alpha * great_circle_flux(u, y)));
    }
  }
  return {worst < 1e-5, std::to_string(fields.size()) + " solutions x 200 axes, max defect " + fmt("%.2e", worst)};
}

Verdict sci() {
  const PlanarDomain unit = PlanarDomain::disk(Vec2::Zero(), 1.0);
  double cap_error = 0.0;
  for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
    const SciResult r = sci_check(cap_factor(lambda), cap_factor(1.0 / lambda), unit);
    cap_error = std::max(cap_error, std::abs(r.mass - 4 * kPi));
  }
  int above = 0, count = 0;
  double least = std::numeric_limits<double>::infinity();
  for (double lambda : {1.0, 1.5, 2.0, 3.0, 5.0}) {
    for (double k : {0.5, 0.7, 0.8, 0.9}) {
      const SciResult r = sci_check(cap_factor(1.0 / lambda), curvature_factor(matching_curvature_scale(lambda, k), k), unit);
      ++count;
      if (r.verdict == SciResult::Verdict::Holds && r.mass > 4 * kPi) ++above;
      least = std::min(least, r.mass - 4 * kPi);
    }
  }
  return {cap_error < 1e-6 && above == count && count == 20,
          "caps |mass - 4 pi| " + fmt("%.2e", cap_error) + "; " + std::to_string(above) + "/" + std::to_string(count) +
              " perturbed pairs above 4 pi (min excess " + fmt("%.3g", least) + ")"};
}

Verdict nodal_area() {
  int pairs = 0;
  double mass_margin = std::numeric_limits<double>::infinity();
  double area_margin = std::numeric_limits<double>::infinity();
  double spherical_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (const auto& [alpha, u] : library().fields) {
    const double sup = u.sup_norm();
    const double stated = 8 * kPi / (2 * std::exp(sup));
    const double corrected = 2 * kPi * alpha * std::exp(-sup);
    for (int i = 0; i < 3; ++i) {
      const Vec3 y = Vec3(n(rng), n(rng), n(rng)).normalized();
      const ReflectedPairs rp = reflected_pair_mass(u, alpha, y, 2);
      if (rp.symmetric || rp.inconclusive) continue;
      for (std::size_t j = 0; j < rp.masses.size(); ++j) {
        ++pairs;
        mass_margin = std::min(mass_margin, rp.masses[j] - 8 * kPi);
        area_margin = std::min(area_margin, rp.areas[j] - stated);
        spherical_margin = std::min(spherical_margin, rp.areas[j] - corrected);
      }
    }
  }
  const bool ok = pairs > 0 && mass_margin >= -1e-4 && area_margin >= -1e-3;
  return {ok, std::to_string(pairs) + " pairs; min(mass - 8 pi) " + fmt("%.4g", mass_margin) +
                  "; min(area - 8 pi/(2 e^|u|)) " + fmt("%.4g", area_margin) + "; min(area - 2 pi alpha e^-|u|) " +
                  fmt("%.4g", spherical_margin)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / ("mfe_acceptance_" + std::to_string(::getpid()));
  ::unsetenv("MFE_OUTPUT_DIR");
  RunConfig c;
  c.alpha = 0.6;
  c.seeds = 3;
  c.seed_base = 7;
  c.symmetry_axes = 500;
  std::ostringstream log;
  c.output_dir = (root / "a").string();
  const int ra = run_command("solve", c, log);
  c.output_dir = (root / "b").string();
  const int rb = run_command("solve", c, log);
  const std::string a = slurp(root / "a" / "solve.jsonl");
  const bool same = !a.empty() && a == slurp(root / "b" / "solve.jsonl") &&
                    slurp(root / "a" / "symmetry.jsonl") == slurp(root / "b" / "symmetry.jsonl");
  fs::remove_all(root);
  return {ra == kExitOk && rb == kExitOk && same, same ? std::to_string(a.size()) + " identical bytes" : "outputs differ"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {1, "spectral infrastructure", 10, spectral},
      {2, "zero-field chain identity", 5, zero_chain},
      {3, "planar residual", 60, planar_residual},
      {4, "bifurcation values", 120, bifurcation},
      {5, "rigidity at alpha = 1/3", 600, rigidity},
      {6, "axial symmetry", 600, axial_symmetry},
      {7, "hemisphere identity", 120, hemisphere_identity},
      {8, "sphere covering verifier", 60, sci},
      {9, "nodal regions and area bound", 120, nodal_area},
      {10, "determinism", std::numeric_limits<double>::infinity(), determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %2d %s  %-30s %s  [%.1f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
