#include "lidar_bias/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace lidar_bias {

SensorModel::SensorModel(std::string name, double half_aperture, double s1, double s2)
    : name_(std::move(name)), half_aperture_(half_aperture), s1_(s1), s2_(s2) {
  if (!(half_aperture > 0.0) || !(half_aperture < std::numbers::pi / 2))
    throw DomainError("sensor half-aperture must lie in (0, pi/2)");
  if (!std::isfinite(s1) || !std::isfinite(s2))
    throw DomainError("sensor scale factors must be finite");
}

SensorModel lms151_preset() { return {"LMS151", deg_to_rad(0.43), 6.08, 3.18e-3}; }
SensorModel rs_lidar16_preset() { return {"RS-LiDAR-16", deg_to_rad(0.085), 84.85, 2.14e-2}; }
SensorModel hdl32e_preset() { return {"HDL-32E", deg_to_rad(0.085), 10.32, 7.08e-3}; }

BiasEvaluation evaluate_bias(double d, double theta, const SensorModel& model,
                             const PulseParams& pulse, const BiasOptions& options) {
  if (!std::isfinite(d) || !(d > 0.0)) throw DomainError("bias: depth must be positive");
  if (!std::isfinite(theta) || theta < 0.0) throw DomainError("bias: incidence must be >= 0");
  const auto& dom = options.domain;

  BiasEvaluation out;
  out.depth = d;
  out.incidence = theta;
  if (d < dom.depth_min || d > dom.depth_max) {
    if (options.policy == DomainPolicy::kStrict)
      throw DomainError("bias: depth outside the validity domain");
    out.depth = std::clamp(d, dom.depth_min, dom.depth_max);
    out.depth_clamped = true;
  }
  if (theta > dom.incidence_max) {
    if (options.policy == DomainPolicy::kStrict)
      throw DomainError("bias: incidence outside the validity domain");
    out.incidence = dom.incidence_max;
    out.incidence_clamped = true;
  }
  out.extrapolated = out.depth > dom.measured_depth_max;

  if (out.incidence == 0.0) {
    out.value = 0.0;
    return out;
  }
  const auto beam = model.beam(options.wavelength);
  const double dd = delta_distance(out.depth, out.incidence, pulse, beam);
  const double ds = delta_shape(out.depth, out.incidence, pulse, beam);
  out.value = model.s1() * dd + model.s2() * ds;
  return out;
}

double bias_error(double d, double theta, const SensorModel& model, const PulseParams& pulse,
                  double wavelength) {
  BiasOptions options;
  options.wavelength = wavelength;
  return evaluate_bias(d, theta, model, pulse, options).value;
}

}  // namespace lidar_bias
