#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mirage {

// Unit-norm point in the shared text/image latent space.
//
// Values are kept in double precision in memory; stores persist them as
// binary32. Construct through normalize() or Embedding::from_unit().
class Embedding {
 public:
  Embedding() = default;

  // Wraps values that are already unit-norm (within 1e-6); throws otherwise.
  static Embedding from_unit(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}
  friend Embedding normalize(std::span<const double>);

  std::vector<double> values_;
};

inline constexpr double kZeroNormEpsilon = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-6;

// v / ||v||. A vector whose norm is already within 1e-12 of one is returned
// unchanged, so normalize(normalize(v)) == normalize(v) bit for bit.
// Throws ZeroVector, NonFiniteInput.
Embedding normalize(std::span<const double> raw);
Embedding normalize(std::span<const float> raw);

// Same as normalize(), additionally checking the expected dimension.
Embedding normalize(std::span<const double> raw, std::size_t expected_dim);

double l2_norm(std::span<const double> v) noexcept;
double dot(std::span<const double> u, std::span<const double> v) noexcept;

// u.v / (|u| |v|), clamped to [-1, 1]. Throws DimensionMismatch, ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);
inline double cosine(const Embedding& u, const Embedding& v) {
  return cosine(u.values(), v.values());
}

}  // namespace mirage
