#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace swba {

using Index = Eigen::Index;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat6 = Eigen::Matrix<Scalar, 6, 6>;

using MatXd = MatX<double>;
using VecXd = VecX<double>;

/// Base class of all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input contained NaN/Inf or a factorization broke down.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Storage precision of an estimator instance. Only these two exist.
enum class Precision { kSingle, kDouble };

template <typename Scalar>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>,
                "only float and double are supported");
  return std::is_same_v<Scalar, float> ? Precision::kSingle
                                       : Precision::kDouble;
}

inline std::string_view to_string(Precision p) {
  return p == Precision::kSingle ? "single" : "double";
}

inline Precision precision_from_string(std::string_view s) {
  if (s == "single" || s == "32" || s == "float") return Precision::kSingle;
  if (s == "double" || s == "64") return Precision::kDouble;
  throw Error("unknown precision '" + std::string(s) + "'");
}

inline int bits(Precision p) { return p == Precision::kSingle ? 32 : 64; }

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": input contains non-finite entries");
  }
}

template <typename Scalar>
constexpr Scalar machine_epsilon() {
  return std::numeric_limits<Scalar>::epsilon();
}

/// Default multiplier k in zero_tol = k * eps * ||A||_F.
inline constexpr double kDefaultZeroTolFactor = 256.0;

template <typename Derived>
typename Derived::Scalar default_zero_tolerance(
    const Eigen::MatrixBase<Derived>& a,
    double factor = kDefaultZeroTolFactor) {
  using Scalar = typename Derived::Scalar;
  return static_cast<Scalar>(factor) * machine_epsilon<Scalar>() * a.norm();
}

}  // namespace swba
