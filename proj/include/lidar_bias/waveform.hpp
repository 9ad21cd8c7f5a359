#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/units.hpp"

namespace lidar_bias {

/// Gaussian emitted pulse: peak power I0 [W/m^2] and length tau [s].
/// sigma = tau / sqrt(2 pi).
template <typename Scalar>
class BasicPulseParams {
 public:
  BasicPulseParams(Scalar peak_power, Scalar pulse_length)
      : peak_power_(peak_power), pulse_length_(pulse_length) {
    using std::isfinite;
    if (!(peak_power > Scalar(0)) || !isfinite(peak_power))
      throw DomainError("pulse peak power must be positive and finite");
    if (!(pulse_length > Scalar(0)) || !isfinite(pulse_length))
      throw DomainError("pulse length must be positive and finite");
    using std::sqrt;
    sigma_ = pulse_length / sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  }

  Scalar peak_power() const { return peak_power_; }
  Scalar pulse_length() const { return pulse_length_; }
  Scalar sigma() const { return sigma_; }

  template <typename Other>
  BasicPulseParams<Other> cast() const {
    return {static_cast<Other>(peak_power_), static_cast<Other>(pulse_length_)};
  }

 private:
  Scalar peak_power_;
  Scalar pulse_length_;
  Scalar sigma_;
};

/// Far-field Gaussian beam: wavelength lambda [m], aperture half-angle alpha
/// [rad]. The waist is w0 = lambda / (pi alpha).
template <typename Scalar>
class BasicBeamGeometry {
 public:
  BasicBeamGeometry(Scalar wavelength, Scalar half_aperture)
      : wavelength_(wavelength), half_aperture_(half_aperture) {
    using std::isfinite;
    if (!(wavelength > Scalar(0)) || !isfinite(wavelength))
      throw DomainError("beam wavelength must be positive and finite");
    if (!(half_aperture > Scalar(0)) || !(half_aperture < std::numbers::pi_v<Scalar> / 2))
      throw DomainError("beam half-aperture must lie in (0, pi/2)");
    waist_ = wavelength / (std::numbers::pi_v<Scalar> * half_aperture);
  }

  Scalar wavelength() const { return wavelength_; }
  Scalar half_aperture() const { return half_aperture_; }
  Scalar waist() const { return waist_; }

  template <typename Other>
  BasicBeamGeometry<Other> cast() const {
    return {static_cast<Other>(wavelength_), static_cast<Other>(half_aperture_)};
  }

 private:
  Scalar wavelength_;
  Scalar half_aperture_;
  Scalar waist_;
};

/// Plane at depth d along the beam axis, its normal tilted by theta.
template <typename Scalar>
struct BasicSurfaceTarget {
  Scalar depth;
  Scalar incidence;

  /// Throws DomainError unless d > 0, 0 <= theta and theta + alpha < pi/2.
  void validate(Scalar half_aperture) const {
    if (!(depth > Scalar(0))) throw DomainError("target depth must be positive");
    if (!(incidence >= Scalar(0))) throw DomainError("incidence must be non-negative");
    if (!(incidence + half_aperture < std::numbers::pi_v<Scalar> / 2))
      throw DomainError("beam does not fully intersect the plane (theta + alpha >= pi/2)");
  }
};

using PulseParams = BasicPulseParams<double>;
using BeamGeometry = BasicBeamGeometry<double>;
using SurfaceTarget = BasicSurfaceTarget<double>;

/// Emitter settings used throughout: I0 = 0.39 W/m^2, tau = 50 ns.
inline PulseParams default_pulse() { return {0.39, 50e-9}; }
inline constexpr double kDefaultWavelength = 905e-9;

struct SampledWaveform {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> samples;

  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double t_end() const { return time_at(samples.empty() ? 0 : samples.size() - 1); }
  /// Trapezoidal energy, used for relative comparisons only.
  double total_energy() const;
};

template <typename Scalar>
struct PointGeometry {
  Scalar rho;  ///< emitter to surface point
  Scalar r;    ///< distance from the beam axis
  Scalar z;    ///< distance along the beam axis
};

// --- point-level physics ---------------------------------------------------

template <typename Scalar>
Scalar emitted_pulse(Scalar t, const BasicPulseParams<Scalar>& pulse) {
  using std::exp;
  const Scalar s = pulse.sigma();
  return pulse.peak_power() * exp(-t * t / (Scalar(2) * s * s));
}

template <typename Scalar>
Scalar beam_intensity(Scalar r, Scalar z, const BasicBeamGeometry<Scalar>& beam) {
  using std::exp;
  if (!(z > Scalar(0))) throw DomainError("beam_intensity: z must be positive");
  const Scalar radius = beam.half_aperture() * z;
  const Scalar ratio = beam.waist() / radius;
  return ratio * ratio * exp(Scalar(-2) * r * r / (radius * radius));
}

/// Geometry of the surface point seen at beam angles (a, b).
template <typename Scalar>
PointGeometry<Scalar> point_geometry(Scalar a, Scalar b, const BasicSurfaceTarget<Scalar>& target) {
  using std::abs;
  using std::cos;
  using std::sqrt;
  using std::tan;
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  if (!(abs(a) < half_pi) || !(abs(b) < half_pi))
    throw DomainError("point_geometry: beam angles must lie in (-pi/2, pi/2)");
  if (!(a + target.incidence < half_pi))
    throw DomainError("point_geometry: grazing geometry, ray does not meet the plane");
  const Scalar z = target.depth * cos(a) * cos(target.incidence) / cos(a + target.incidence);
  const Scalar ta = tan(a);
  const Scalar tb = tan(b);
  const Scalar r2 = z * z * (ta * ta + tb * tb);
  return {sqrt(r2 + z * z), sqrt(r2), z};
}

/// Lambertian-weighted energy reaching the surface point at (a, b), with the
/// outbound delay rho / c applied to the pulse.
template <typename Scalar>
Scalar projected_energy(Scalar t, Scalar a, Scalar b, const BasicSurfaceTarget<Scalar>& target,
                        const BasicPulseParams<Scalar>& pulse,
                        const BasicBeamGeometry<Scalar>& beam) {
  using std::cos;
  const auto g = point_geometry(a, b, target);
  // cos(gamma) with gamma = acos(cos(a + theta) cos b)
  const Scalar lambert = cos(a + target.incidence) * cos(b);
  const Scalar c = static_cast<Scalar>(kSpeedOfLight);
  return lambert * emitted_pulse(t - g.rho / c, pulse) * beam_intensity(g.r, g.z, beam);
}

// --- return waveform oracle --------------------------------------------------

struct TimeWindow {
  double begin;
  double end;
};

enum class IntegrationMode { kRestricted2d, kFullSurface };

struct WaveformOptions {
  /// Absolute quadrature tolerance, relative to the waveform value at 2d/c.
  double relative_tolerance = 1e-12;
  int initial_panels = 16;
  int max_depth = 40;
};

/// [2d/c - 4 sigma, 2d/c + 4 sigma].
TimeWindow default_time_window(const SurfaceTarget& target, const PulseParams& pulse);
inline constexpr std::size_t kDefaultSampleCount = 512;

/// Received intensity, integrating over a in [-alpha, alpha] at b = 0. Each
/// surface point contributes with total round-trip delay 2 rho / c.
SampledWaveform return_waveform_2d(const SurfaceTarget& target, const PulseParams& pulse,
                                   const BeamGeometry& beam, TimeWindow window,
                                   std::size_t n_samples, const WaveformOptions& options = {});

/// As return_waveform_2d but over the full patch (a, b) in [-alpha, alpha]^2.
SampledWaveform return_waveform_full(const SurfaceTarget& target, const PulseParams& pulse,
                                     const BeamGeometry& beam, TimeWindow window,
                                     std::size_t n_samples, const WaveformOptions& options = {});

SampledWaveform return_waveform(IntegrationMode mode, const SurfaceTarget& target,
                                const PulseParams& pulse, const BeamGeometry& beam,
                                TimeWindow window, std::size_t n_samples,
                                const WaveformOptions& options = {});

/// Single waveform value at time t (same integrand and tolerance rule).
double return_intensity(IntegrationMode mode, double t, const SurfaceTarget& target,
                        const PulseParams& pulse, const BeamGeometry& beam,
                        const WaveformOptions& options = {});

/// Sub-sample peak: parabola through the maximum sample and its neighbours.
/// Throws WindowTooNarrowError when the maximum is the first or last sample.
double peak_time(const SampledWaveform& w);

struct OraclePeakShift {
  double peak_time;       ///< refined argmax at theta [s]
  double reference_time;  ///< refined argmax of the same oracle at theta = 0 [s]
  double absolute_shift;  ///< peak_time * c/2 - d [m]
  double shift;           ///< (peak_time - reference_time) * c/2 [m]
};

/// Peak displacement of the simulated waveform at `target`, expressed in
/// metres, both against 2d/c and against the normal-incidence waveform.
/// Both waveforms share the default window and sample grid. In full-surface
/// mode only the samples around the peak are integrated, starting from the
/// restricted waveform's maximum; the waveform is single-peaked.
OraclePeakShift oracle_peak_shift(IntegrationMode mode, const SurfaceTarget& target,
                                  const PulseParams& pulse, const BeamGeometry& beam,
                                  std::size_t n_samples = kDefaultSampleCount,
                                  const WaveformOptions& options = {});

}  // namespace lidar_bias
