#pragma once

// Geometric diagnostics of solutions: gradient profiles along great circles, hypothesis (H),
// axis classes, the tangent field F, reflection defects, nodal decompositions, axis
// detection and antipodal critical points.
//
// Conventions. For a unit axis y, C_y is the great circle orthogonal to y, parameterized as
// c(t) = cos(t) e1 + sin(t) e2 with e1 x e2 = y, i.e. counterclockwise when viewed from y.
// The profile is g(t) = grad u(c(t)) . y.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfe/sphere_field.hpp"

namespace mfe {

inline constexpr double kZeroEpsilon = 1e-9;
inline constexpr double kTransversalSlope = 1e-7;
inline constexpr int kMinProfileSamples = 128;

enum class AxisClass {
  S2,           ///< exactly two zeros, both transversal sign changes
  S1,           ///< exactly one zero
  HViolation,   ///< no zero on C_y
  Degenerate,   ///< |g| < kZeroEpsilon on the whole circle
  MultiZero,    ///< three or more zeros, or two zeros that are not both sign changes
};

std::string to_string(AxisClass c);

struct CircleZero {
  enum class Kind { PlusToMinus, MinusToPlus, Tangential };
  double angle = 0.0;
  Vec3 point = Vec3::Zero();
  double value = 0.0;
  double slope = 0.0;
  Kind kind = Kind::Tangential;
  /// Sign change with |g'| > kTransversalSlope.
  bool transversal = false;
};

std::string to_string(CircleZero::Kind k);

struct GreatCircleProfile {
  Vec3 axis = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  /// Equispaced angles t_i = 2 pi i / n and g(t_i).
  Eigen::VectorXd angles;
  Eigen::VectorXd samples;
  std::vector<CircleZero> zeros;
  AxisClass axis_class = AxisClass::Degenerate;

  Vec3 point(double t) const;
  int sign_changes() const;
  int transversal_zeros() const;
};

/// Builds and classifies a profile from an arbitrary 2 pi-periodic function g with
/// derivative dg. Detection samples at max(n, detect_n) points; zeros are refined by
/// safeguarded Newton-bisection. Throws ValidationError for n < 128 or non-unit axis.
GreatCircleProfile make_profile(const Vec3& axis, const std::function<double(double)>& g,
                                const std::function<double(double)>& dg, int n, int detect_n = 0);

/// Profile of grad u . y along C_y, evaluated spectrally (exact for band-limited u).
GreatCircleProfile circle_profile(const SphereField& u, const Vec3& y, int n = 256);

/// Quasi-uniform Fibonacci axes on the upper hemisphere (one per antipodal pair).
std::vector<Vec3> fibonacci_axes(int n = 1000);

struct HypothesisVerdict {
  bool holds = true;
  std::vector<Vec3> violating_axes;
  std::vector<AxisClass> classes;
  int count_s2 = 0;
  int count_s1 = 0;
  int count_violation = 0;
  int count_degenerate = 0;
  int count_multi = 0;
};

/// (H) holds iff no sampled axis is an H_violation (degenerate axes count as satisfying).
/// Requires at least 500 axes. Axes are processed on worker threads; results are in axis order.
HypothesisVerdict check_hypothesis_H(const SphereField& u, const std::vector<Vec3>& axes, int n = 256);

struct ThreeZeroResult {
  enum class Status { NotApplicable, Consistent, Violation };
  Status status = Status::NotApplicable;
  int zeros = 0;
  double defect = 0.0;
};

std::string to_string(ThreeZeroResult::Status s);

/// Consistency alarm for the three-zero rigidity: when u solves the equation at alpha (residual below
/// 1e-6) and C_y carries >= 3 transversal zeros or is degenerate, the reflection defect
/// about P_y must be below 1e-5.
ThreeZeroResult three_zero_test(const SphereField& u, const Vec3& y, double alpha, int n = 256);

struct FieldValue {
  enum class Status { Defined, Absent, AntipodalDegenerate };
  Status status = Status::Absent;
  Vec3 value = Vec3::Zero();
};

/// F at the profile's axis: Case I (S2) normalized tangent projection of p2 - p1 with p1 the
/// + to - crossing and p2 the - to + crossing; Case II (S1) the unit tangent y x p, negated
/// when g <= 0 on C_y. Absent for the other classes.
///
/// Since p1, p2 lie on C_y the chord is already orthogonal to y, so the projection is the
/// identity and the antipodal-degenerate status cannot occur for a valid profile; it is kept
/// as a guard.
FieldValue vector_field_F(const GreatCircleProfile& profile);
FieldValue vector_field_F(const SphereField& u, const Vec3& y, int n = 256);

/// Vertices and faces of a subdivided icosahedron on the unit sphere.
struct Triangulation {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

Triangulation icosphere(int subdivisions);

struct DegreeResult {
  bool defined = false;
  int degree = 0;
  /// Faces with nonzero winding (sites of zeros or discontinuities of the field).
  std::vector<int> singular_faces;
  std::vector<int> face_winding;
  /// Vertices where the field is absent (when not defined).
  std::vector<Vec3> absence_set;
  /// degree == 2, the Euler characteristic of the sphere.
  bool matches_euler_characteristic = false;
};

/// Total winding of a tangent field over a triangulation. Vectors at the three corners are
/// projected to the tangent plane at the face centroid and the signed angle increments
/// summed around the boundary.
DegreeResult field_degree(const std::function<std::optional<Vec3>(const Vec3&)>& field, const Triangulation& mesh);

/// Degree of F built from u on an icosphere of the given subdivision level.
DegreeResult field_degree(const SphereField& u, int subdivisions = 3, int n = 256);

/// sup |u(x) - u(x_hat)| with x_hat the reflection through P_y.
double reflection_defect(const SphereField& u, const Vec3& y);

/// Coefficients of u rotated so that y is the pole, and of Phi_y = u - u o reflection in
/// that frame (where the reflection is x3 -> -x3).
struct ReflectionFrame {
  Mat3 rotation;
  Eigen::VectorXd rotated;
  Eigen::VectorXd reflected;
  Eigen::VectorXd phi;
};

ReflectionFrame reflection_frame(const SphereField& u, const Vec3& y);

struct NodalRegion {
  int sign = 0;
  int nodes = 0;
  double area = 0.0;
  /// Node indices on the evaluation grid.
  std::vector<int> members;
};

struct NodalDecomposition {
  Vec3 axis = Vec3::UnitZ();
  std::vector<NodalRegion> regions;
  bool inconclusive = false;
  double sup_norm = 0.0;
  /// 8 pi / (2 e^{||u||}), the required lower bound on region areas.
  double area_bound = 0.0;
  /// min region area >= area_bound - 1e-3.
  bool area_bound_holds = true;
  double min_area = 0.0;
  int count() const { return static_cast<int>(regions.size()); }
};

/// Connected components of {Phi_y > tau} and {Phi_y < -tau} on an oversampled evaluation
/// grid (refine x the field grid in each direction), flood-filled through ring and pole
/// adjacency. Throws ValidationError when the reflection defect is <= 1e-8.
NodalDecomposition nodal_regions(const SphereField& u, const Vec3& y, double tau = 1e-9, int refine = 4);

/// Evaluation grid used by nodal_regions: the rotated frame has y at the pole.
GridPtr nodal_grid(const SphereField& u, int refine);

struct AxisDetection {
  Vec3 axis = Vec3::UnitZ();
  double deviation = 0.0;
  /// Some candidate reached deviation <= 0.1; otherwise u is reported as not axisymmetric.
  bool found = false;
};

/// Candidate axes from the dipole, the quadrupole tensor and the gradient tensor
/// int grad u (x) grad u, followed by a local pattern search; deviation is the sup of the
/// non-zonal part after rotating the axis to the pole. Throws ValidationError for constant u.
AxisDetection detect_axis(const SphereField& u);

/// sup of the non-zonal part of u about `axis`.
double axis_deviation(const SphereField& u, const Vec3& axis);

struct CriticalPair {
  Vec3 point = Vec3::UnitZ();
  double gradient_plus = 0.0;
  double gradient_minus = 0.0;
  double value_plus = 0.0;
  double value_minus = 0.0;
  /// Both points have a nondegenerate Hessian (not part of a critical curve).
  bool isolated = false;
};

struct CriticalPairResult {
  /// |grad u| < 1e-8 everywhere on the grid.
  bool degenerate = false;
  std::vector<CriticalPair> pairs;
};

/// Critical points from grid minima of |grad u|, refined by Newton in a local chart; returns
/// pairs (x, -x) that are both critical within 1e-8, isolated pairs first.
CriticalPairResult antipodal_critical_pair(const SphereField& u);

// --- report ----------------------------------------------------------------------------

struct AxisRecord {
  Vec3 axis;
  AxisClass axis_class = AxisClass::Degenerate;
  std::vector<CircleZero> zeros;
  FieldValue field;
  double defect = 0.0;
};

struct SymmetryReport {
  std::vector<AxisRecord> axes;
  HypothesisVerdict hypothesis;
  Vec3 best_reflection_axis = Vec3::UnitZ();
  double best_reflection_defect = 0.0;
  std::optional<AxisDetection> rotation_axis;
  bool constant = false;
  /// (axis index, region count) for the axes examined for nodal structure.
  std::vector<std::pair<int, int>> nodal_counts;
};

struct SymmetryOptions {
  int axes = 1000;
  int samples = 256;
  /// Number of leading sampled axes (with nonzero defect) examined for nodal regions.
  int nodal_axes = 8;
};

SymmetryReport symmetry_report(const SphereField& u, const SymmetryOptions& options = {});

}  // namespace mfe
