#pragma once

#include <numbers>

namespace lidar_bias {

/// Speed of light in vacuum [m/s], exact by definition of the metre.
inline constexpr double kSpeedOfLight = 299'792'458.0;

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

}  // namespace lidar_bias
