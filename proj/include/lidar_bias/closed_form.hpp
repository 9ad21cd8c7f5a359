#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/units.hpp"
#include "lidar_bias/waveform.hpp"

namespace lidar_bias {

// Cubic approximation of the return waveform around T = t - 2d/c:
//   RP(T) ~ a0 + a1 T + a2 T^2 + a3 T^3
// obtained from a first-order expansion of the restricted (b = 0) integral.

template <typename Scalar>
struct TaylorIntermediates {
  Scalar A;   ///< Gaussian width in a, includes the range spread across the footprint
  Scalar B;   ///< linear coefficient in a, depends on t
  Scalar C;   ///< pulse exponent at t
  Scalar K1;  ///< cos^3 theta
  Scalar K2;  ///< 3 cos^2 theta sin theta
};

template <typename Scalar>
struct CubicCoefficients {
  Scalar a0, a1, a2, a3;
  Scalar l1, l2;

  Scalar evaluate(Scalar T) const { return ((a3 * T + a2) * T + a1) * T + a0; }
  Scalar discriminant() const { return Scalar(4) * a2 * a2 - Scalar(12) * a1 * a3; }
};

namespace detail {

template <typename Scalar>
void check_closed_form_domain(Scalar d, Scalar theta) {
  if (!(d > Scalar(0))) throw DomainError("depth must be positive");
  if (!(theta >= Scalar(0)) || !(theta < std::numbers::pi_v<Scalar> / 2))
    throw DomainError("incidence must lie in [0, pi/2)");
}

}  // namespace detail

template <typename Scalar>
TaylorIntermediates<Scalar> taylor_intermediates(Scalar d, Scalar theta, Scalar t,
                                                 const BasicPulseParams<Scalar>& pulse,
                                                 const BasicBeamGeometry<Scalar>& beam) {
  using std::cos;
  using std::sin;
  using std::tan;
  detail::check_closed_form_domain(d, theta);
  const Scalar c = static_cast<Scalar>(kSpeedOfLight);
  const Scalar s2 = pulse.sigma() * pulse.sigma();
  const Scalar alpha = beam.half_aperture();
  const Scalar tn = tan(theta);
  const Scalar cs = cos(theta);
  const Scalar T = t - Scalar(2) * d / c;
  TaylorIntermediates<Scalar> out;
  out.A = Scalar(2) * d * d * tn * tn / (s2 * c * c) + Scalar(2) / (alpha * alpha);
  out.B = T * (Scalar(2) * d * tn / c) / s2;
  out.C = -T * T / (Scalar(2) * s2);
  out.K1 = cs * cs * cs;
  out.K2 = Scalar(3) * cs * cs * sin(theta);
  return out;
}

template <typename Scalar>
CubicCoefficients<Scalar> cubic_coefficients(Scalar d, Scalar theta,
                                             const BasicPulseParams<Scalar>& pulse,
                                             const BasicBeamGeometry<Scalar>& beam) {
  using std::cos;
  using std::erf;
  using std::exp;
  using std::sqrt;
  using std::tan;
  const auto ti = taylor_intermediates(d, theta, Scalar(2) * d / static_cast<Scalar>(kSpeedOfLight),
                                       pulse, beam);
  const Scalar c = static_cast<Scalar>(kSpeedOfLight);
  const Scalar sigma = pulse.sigma();
  const Scalar s2 = sigma * sigma;
  const Scalar alpha = beam.half_aperture();
  const Scalar A = ti.A;
  const Scalar tn = tan(theta);
  const Scalar cs = cos(theta);
  const Scalar cs2 = cs * cs;

  const Scalar footprint = beam.waist() / (alpha * d * cs);
  const Scalar amplitude = pulse.peak_power() * footprint * footprint;
  const Scalar sqrtA = sqrt(A);

  CubicCoefficients<Scalar> k;
  k.l1 = amplitude * sqrt(std::numbers::pi_v<Scalar>) * erf(alpha * sqrtA) /
         (Scalar(2) * A * sqrtA);
  k.l2 = amplitude * ti.K2 / (Scalar(2) * A);
  k.a0 = Scalar(2) * A * ti.K1 * k.l1;
  k.a1 = -(Scalar(2) * d * tn *
           (Scalar(-2) * k.l2 * alpha * exp(-A * alpha * alpha) + k.l1 * ti.K2)) /
         (s2 * c);
  k.a2 = -(Scalar(2) * A * ti.K1 * k.l1 *
           (s2 * c * c * A * cs2 + Scalar(2) * d * d * cs2 - Scalar(2) * d * d)) /
         (Scalar(2) * cs2 * s2 * s2 * c * c * A);
  k.a3 = k.l1 * ti.K2 * d * tn * (s2 * c * c * A - Scalar(2) * d * d * tn * tn) /
         (s2 * s2 * s2 * c * c * c * A);
  return k;
}

/// Offset T* (seconds from 2d/c) of the waveform maximum predicted by the
/// cubic: the critical point with negative second derivative closest to 0.
/// Uses the quadratic limit -a1 / (2 a2) when |a3| < 1e-18 |a2| / sigma.
template <typename Scalar>
Scalar peak_offset(const CubicCoefficients<Scalar>& k, Scalar sigma) {
  using std::abs;
  using std::sqrt;
  if (abs(k.a3) < Scalar(1e-18) * abs(k.a2) / sigma) {
    if (!(k.a2 < Scalar(0))) throw ModelValidityError("cubic has no maximum near T = 0");
    return -k.a1 / (Scalar(2) * k.a2) + Scalar(0);
  }
  const Scalar disc = k.discriminant();
  if (!(disc >= Scalar(0)))
    throw ModelValidityError("negative discriminant: waveform cubic has no real peak");
  // roots of 3 a3 T^2 + 2 a2 T + a1 = 0 without cancellation
  const Scalar qa = Scalar(3) * k.a3;
  const Scalar qb = Scalar(2) * k.a2;
  const Scalar root = sqrt(disc);
  const Scalar q = Scalar(-0.5) * (qb + (qb < Scalar(0) ? -root : root));
  Scalar best = std::numeric_limits<Scalar>::quiet_NaN();
  auto consider = [&](Scalar T) {
    if (!std::isfinite(static_cast<double>(T))) return;
    if (!(Scalar(6) * k.a3 * T + Scalar(2) * k.a2 < Scalar(0))) return;
    if (std::isnan(static_cast<double>(best)) || abs(T) < abs(best)) best = T;
  };
  consider(q / qa);
  if (q != Scalar(0)) consider(k.a1 / q);
  if (std::isnan(static_cast<double>(best)))
    throw ModelValidityError("no critical point of the cubic is a maximum");
  return best;
}

/// Ideal-detector range bias [m]: predicted peak displacement times c/2.
template <typename Scalar>
Scalar delta_distance(Scalar d, Scalar theta, const BasicPulseParams<Scalar>& pulse,
                      const BasicBeamGeometry<Scalar>& beam) {
  const auto k = cubic_coefficients(d, theta, pulse, beam);
  return peak_offset(k, pulse.sigma()) * static_cast<Scalar>(kSpeedOfLight) / Scalar(2);
}

/// sqrt(4 a2^2 - 12 a1 a3), the waveform curvature at its peak.
template <typename Scalar>
Scalar curvature_at_peak(const CubicCoefficients<Scalar>& k) {
  using std::sqrt;
  const Scalar disc = k.discriminant();
  if (!(disc >= Scalar(0)))
    throw ModelValidityError("negative discriminant: waveform cubic has no real peak");
  return sqrt(disc);
}

/// 1 - kappa(d, 0) / kappa(d, theta).
template <typename Scalar>
Scalar delta_shape(Scalar d, Scalar theta, const BasicPulseParams<Scalar>& pulse,
                   const BasicBeamGeometry<Scalar>& beam) {
  if (theta == Scalar(0)) {
    detail::check_closed_form_domain(d, theta);
    return Scalar(0);
  }
  const Scalar k0 = curvature_at_peak(cubic_coefficients(d, Scalar(0), pulse, beam));
  const Scalar kt = curvature_at_peak(cubic_coefficients(d, theta, pulse, beam));
  if (!(kt > Scalar(0))) throw ModelValidityError("zero peak curvature: model validity breached");
  return Scalar(1) - k0 / kt;
}

// --- sensor model --------------------------------------------------------------

/// Bias model of one sensor: e(d, theta) = s1 * delta_d + s2 * delta_shape.
/// s2 is in metres.
class SensorModel {
 public:
  SensorModel(std::string name, double half_aperture, double s1, double s2);

  const std::string& name() const { return name_; }
  double half_aperture() const { return half_aperture_; }
  double s1() const { return s1_; }
  double s2() const { return s2_; }

  BeamGeometry beam(double wavelength = kDefaultWavelength) const {
    return {wavelength, half_aperture_};
  }

 private:
  std::string name_;
  double half_aperture_;
  double s1_;
  double s2_;
};

SensorModel lms151_preset();
SensorModel rs_lidar16_preset();
SensorModel hdl32e_preset();

enum class DomainPolicy { kClamp, kStrict };

/// Envelope in which the bias model is trusted. Depths above
/// `measured_depth_max` are extrapolation and flagged as such.
struct ValidityDomain {
  double depth_min = 0.5;
  double depth_max = 30.0;
  double measured_depth_max = 10.0;
  double incidence_max = deg_to_rad(85.0);
};

struct BiasEvaluation {
  double value = 0.0;
  double depth = 0.0;      ///< depth actually used
  double incidence = 0.0;  ///< incidence actually used
  bool depth_clamped = false;
  bool incidence_clamped = false;
  bool extrapolated = false;

  bool clamped() const { return depth_clamped || incidence_clamped; }
};

struct BiasOptions {
  DomainPolicy policy = DomainPolicy::kClamp;
  ValidityDomain domain{};
  double wavelength = kDefaultWavelength;
};

/// Evaluates e(d, theta) [m] with domain handling. Under kStrict an
/// out-of-domain input throws DomainError; under kClamp it is clamped into
/// the domain and flagged. Negative or non-finite inputs always throw.
BiasEvaluation evaluate_bias(double d, double theta, const SensorModel& model,
                             const PulseParams& pulse, const BiasOptions& options = {});

/// e(d, theta) [m] under the clamp policy.
double bias_error(double d, double theta, const SensorModel& model, const PulseParams& pulse,
                  double wavelength = kDefaultWavelength);

}  // namespace lidar_bias
