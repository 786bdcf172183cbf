#include "mfe/sphere_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mfe/errors.hpp"
#include "mfe/rotation.hpp"

namespace mfe {

SphereField::SphereField(GridPtr grid, Eigen::VectorXd coeffs) : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
  if (!grid_) throw ValidationError("SphereField: null grid");
  if (coeffs_.size() != grid_->coefficient_count()) {
    const int L = bandlimit_of(coeffs_.size());
    if (L > grid_->bandlimit()) {
      throw ResolutionError("SphereField: bandlimit " + std::to_string(L) + " exceeds grid bandlimit " +
                            std::to_string(grid_->bandlimit()));
    }
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(grid_->coefficient_count());
    padded.head(coeffs_.size()) = coeffs_;
    coeffs_ = std::move(padded);
  }
  values_ = grid_->synthesize(coeffs_);
  sup_norm_ = values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0;
}

SphereField SphereField::from_values(GridPtr grid, const Eigen::VectorXd& values) {
  Eigen::VectorXd c = grid->analyze(values);
  return SphereField(std::move(grid), std::move(c));
}

SphereField SphereField::from_function(GridPtr grid, const std::function<double(const Vec3&)>& f) {
  Eigen::VectorXd v(grid->size());
  for (Eigen::Index i = 0; i < grid->size(); ++i) v[i] = f(grid->node(i));
  return from_values(std::move(grid), v);
}

SphereField SphereField::constant(GridPtr grid, double c) {
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(grid->coefficient_count());
  coeffs[0] = c;
  return SphereField(std::move(grid), std::move(coeffs));
}

SphereField SphereField::harmonic(GridPtr grid, int k, int m, double amplitude) {
  if (k < 0 || std::abs(m) > k || k > grid->bandlimit()) {
    throw ValidationError("harmonic (" + std::to_string(k) + ", " + std::to_string(m) + ") out of range");
  }
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(grid->coefficient_count());
  coeffs[harmonic_index(k, m)] = amplitude;
  return SphereField(std::move(grid), std::move(coeffs));
}

namespace {
void require_same_grid(const SphereField& a, const SphereField& b) {
  if (a.grid_ptr() != b.grid_ptr() && (a.grid().bandlimit() != b.grid().bandlimit() ||
                                       a.grid().n_theta() != b.grid().n_theta() ||
                                       a.grid().n_phi() != b.grid().n_phi())) {
    throw ValidationError("fields live on different grids");
  }
}
}  // namespace

SphereField SphereField::operator+(const SphereField& other) const {
  require_same_grid(*this, other);
  return SphereField(grid_, coeffs_ + other.coeffs_);
}

SphereField SphereField::operator-(const SphereField& other) const {
  require_same_grid(*this, other);
  return SphereField(grid_, coeffs_ - other.coeffs_);
}

SphereField SphereField::operator+(double c) const {
  Eigen::VectorXd out = coeffs_;
  out[0] += c;
  return SphereField(grid_, std::move(out));
}

SphereField SphereField::operator*(double s) const { return SphereField(grid_, coeffs_ * s); }

double quadrature(const SphereField& field) { return field.grid().integrate(field.values()); }

SphereField analyze_to_field(GridPtr grid, const Eigen::VectorXd& values) {
  return SphereField::from_values(std::move(grid), values);
}

Eigen::VectorXd synthesize(const SphereField& field) { return field.values(); }

SphereField laplace_beltrami(const SphereField& field) {
  return SphereField(field.grid_ptr(), laplace_beltrami(field.coeffs()));
}

SphereField rotate_field(const SphereField& field, const Mat3& rotation) {
  return SphereField(field.grid_ptr(), rotate_coefficients(field.coeffs(), rotation));
}

double hemisphere_integral(const SphereField& u, const Vec3& y, const std::function<double(double)>& g) {
  const SphereGrid& grid = u.grid();
  const Eigen::VectorXd rotated = rotate_coefficients(u.coeffs(), rotation_to_pole(y));
  const Eigen::MatrixXd trig = longitude_basis(grid.bandlimit(), grid.n_phi());
  Eigen::MatrixXd v = synthesize_rings(rotated, grid.hemisphere_table(), trig, RingComponent::Value);
  if (g) v = v.unaryExpr(g);
  const Eigen::VectorXd ring_means = v.rowwise().mean();
  return 2.0 * std::numbers::pi * grid.hemisphere_weights().dot(ring_means);
}

double great_circle_flux(const SphereField& u, const Vec3& y, int n) {
  const SphereGrid& grid = u.grid();
  if (n <= 0) n = grid.n_phi();
  const Eigen::VectorXd rotated = rotate_coefficients(u.coeffs(), rotation_to_pole(y));
  const Eigen::MatrixXd trig = longitude_basis(grid.bandlimit(), n);
  const Eigen::MatrixXd dtheta = synthesize_rings(rotated, grid.equator_table(), trig, RingComponent::DTheta);
  // grad u . e3 on the equator is -d/dtheta.
  return -2.0 * std::numbers::pi * dtheta.row(0).mean();
}

double refined_sup_norm(const Eigen::VectorXd& coeffs, const SphereGrid& grid) {
  const Eigen::VectorXd values = grid.synthesize(coeffs);
  std::vector<Eigen::Index> order(values.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t candidates = std::min<std::size_t>(8, order.size());
  std::partial_sort(order.begin(), order.begin() + candidates, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return std::abs(values[a]) > std::abs(values[b]); });

  double best = 0.0;
  for (std::size_t c = 0; c < candidates; ++c) {
    Vec3 x = grid.node(order[c]);
    auto [f, g] = evaluate_with_gradient(coeffs, x);
    const double sign = f >= 0.0 ? 1.0 : -1.0;
    double value = std::abs(f);
    double step = 0.05;
    for (int iter = 0; iter < 200 && step > 1e-15; ++iter) {
      const Vec3 dir = sign * g;
      const double gnorm = dir.norm();
      if (gnorm < 1e-15) break;
      const Vec3 t = dir / gnorm;
      const Vec3 trial = (std::cos(step) * x + std::sin(step) * t).normalized();
      auto [ft, gt] = evaluate_with_gradient(coeffs, trial);
      if (sign * ft > value) {
        x = trial;
        value = sign * ft;
        g = gt;
        step *= 1.5;
      } else {
        step *= 0.3;
      }
    }
    best = std::max(best, value);
  }
  return std::max(best, values.cwiseAbs().maxCoeff());
}

// --- serialization ---------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'F', 'E', 'F', 'I', 'E', 'L', 'D'};

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
void put(std::string& buffer, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buffer.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buffer, std::size_t& offset) {
  if (offset + sizeof(T) > buffer.size()) throw FormatError("field file truncated");
  T value;
  std::memcpy(&value, buffer.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void write_field(std::ostream& out, const SphereField& field) {
  std::string buffer(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buffer, kFieldFormatVersion);
  put<std::uint32_t>(buffer, static_cast<std::uint32_t>(field.grid().bandlimit()));
  put<std::uint32_t>(buffer, static_cast<std::uint32_t>(field.grid().n_theta()));
  put<std::uint32_t>(buffer, static_cast<std::uint32_t>(field.grid().n_phi()));
  put<std::uint64_t>(buffer, static_cast<std::uint64_t>(field.coeffs().size()));
  for (Eigen::Index i = 0; i < field.coeffs().size(); ++i) put<double>(buffer, field.coeffs()[i]);
  put<std::uint64_t>(buffer, fnv1a(buffer));
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw FormatError("failed to write field");
}

SphereField read_field(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buffer = ss.str();
  if (buffer.size() < sizeof(kMagic) + 32 || std::memcmp(buffer.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a field file (bad magic)");
  }
  std::size_t offset = sizeof(kMagic);
  const auto version = take<std::uint32_t>(buffer, offset);
  if (version != kFieldFormatVersion) throw FormatError("unsupported field format version " + std::to_string(version));
  const auto L = take<std::uint32_t>(buffer, offset);
  const auto n_theta = take<std::uint32_t>(buffer, offset);
  const auto n_phi = take<std::uint32_t>(buffer, offset);
  const auto count = take<std::uint64_t>(buffer, offset);
  if (count != static_cast<std::uint64_t>(harmonic_count(static_cast<int>(L)))) {
    throw FormatError("coefficient count does not match bandlimit");
  }
  if (buffer.size() != offset + count * 8 + 8) throw FormatError("field file has wrong length");
  const std::uint64_t expected = fnv1a(buffer.substr(0, offset + count * 8));
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs[i] = take<double>(buffer, offset);
  const auto stored = take<std::uint64_t>(buffer, offset);
  if (stored != expected) throw FormatError("field file checksum mismatch");
  return SphereField(shared_grid(static_cast<int>(L), static_cast<int>(n_theta), static_cast<int>(n_phi)),
                     std::move(coeffs));
}

void save_field(const std::string& path, const SphereField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_field(out, field);
}

SphereField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open field file " + path);
  return read_field(in);
}

}  // namespace mfe
