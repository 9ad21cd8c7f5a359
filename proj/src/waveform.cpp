#include "lidar_bias/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <vector>

#include "lidar_bias/quadrature.hpp"

namespace lidar_bias {
namespace {

// Projected energy with the return leg applied: the outbound delay lives in
// projected_energy, the inbound one is added here, 2 rho / c in total.
double round_trip_integrand(double t, double a, double b, const SurfaceTarget& target,
                            const PulseParams& pulse, const BeamGeometry& beam) {
  const auto g = point_geometry(a, b, target);
  const double lambert = std::cos(a + target.incidence) * std::cos(b);
  const double delayed = t - 2.0 * g.rho / kSpeedOfLight;
  return lambert * emitted_pulse(delayed, pulse) * beam_intensity(g.r, g.z, beam);
}

QuadratureOptions quadrature_options(const WaveformOptions& o, double abs_tol) {
  return {abs_tol, o.initial_panels, o.max_depth};
}

double integrate_at(IntegrationMode mode, double t, const SurfaceTarget& target,
                    const PulseParams& pulse, const BeamGeometry& beam,
                    const WaveformOptions& options, double abs_tol) {
  const double alpha = beam.half_aperture();
  if (mode == IntegrationMode::kRestricted2d) {
    auto f = [&](double a) { return round_trip_integrand(t, a, 0.0, target, pulse, beam); };
    return integrate_adaptive_simpson(f, -alpha, alpha, quadrature_options(options, abs_tol))
        .value;
  }
  // the integrand is even in b
  const auto inner_opts = quadrature_options(options, abs_tol / (4.0 * alpha));
  auto outer = [&](double a) {
    auto inner = [&](double b) { return round_trip_integrand(t, a, b, target, pulse, beam); };
    return 2.0 * integrate_adaptive_simpson(inner, 0.0, alpha, inner_opts).value;
  };
  return integrate_adaptive_simpson(outer, -alpha, alpha, quadrature_options(options, abs_tol))
      .value;
}

// Magnitude of the waveform near its peak, sets the absolute tolerance.
double reference_scale(IntegrationMode mode, const SurfaceTarget& target,
                       const PulseParams& pulse, const BeamGeometry& beam) {
  const double alpha = beam.half_aperture();
  const double t = 2.0 * target.depth / kSpeedOfLight;
  auto f2d = [&](double a) { return round_trip_integrand(t, a, 0.0, target, pulse, beam); };
  double scale = integrate_composite_simpson(f2d, -alpha, alpha, 256);
  if (mode == IntegrationMode::kFullSurface) {
    auto fb = [&](double b) { return round_trip_integrand(t, 0.0, b, target, pulse, beam); };
    const double width = integrate_composite_simpson(fb, -alpha, alpha, 256) /
                         round_trip_integrand(t, 0.0, 0.0, target, pulse, beam);
    scale *= width;
  }
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw NumericError("waveform reference scale is not positive", scale, 0.0);
  return scale;
}

void check_inputs(const SurfaceTarget& target, const BeamGeometry& beam, TimeWindow window,
                  std::size_t n_samples) {
  target.validate(beam.half_aperture());
  if (n_samples < 64) throw DomainError("waveform needs at least 64 samples");
  if (!(window.end > window.begin)) throw DomainError("empty time window");
}

SampledWaveform sample(IntegrationMode mode, const SurfaceTarget& target,
                       const PulseParams& pulse, const BeamGeometry& beam, TimeWindow window,
                       std::size_t n_samples, const WaveformOptions& options) {
  check_inputs(target, beam, window, n_samples);
  const double abs_tol =
      options.relative_tolerance * reference_scale(mode, target, pulse, beam);
  SampledWaveform w;
  w.t0 = window.begin;
  w.dt = (window.end - window.begin) / static_cast<double>(n_samples - 1);
  w.samples.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double v = integrate_at(mode, w.time_at(i), target, pulse, beam, options, abs_tol);
    // the integrand is non-negative; quadrature round-off can dip below zero
    w.samples[i] = std::max(v, 0.0);
  }
  return w;
}

// Refined peak of the waveform sampled on `window` with `n_samples`, found by
// hill climbing from `start`; only the samples visited are integrated.
double climb_peak(IntegrationMode mode, const SurfaceTarget& target, const PulseParams& pulse,
                  const BeamGeometry& beam, TimeWindow window, std::size_t n_samples,
                  const WaveformOptions& options, std::size_t start) {
  check_inputs(target, beam, window, n_samples);
  const double abs_tol =
      options.relative_tolerance * reference_scale(mode, target, pulse, beam);
  const double dt = (window.end - window.begin) / static_cast<double>(n_samples - 1);
  std::vector<double> cache(n_samples, -1.0);
  auto value = [&](std::size_t i) {
    if (cache[i] < 0.0) {
      const double t = window.begin + dt * static_cast<double>(i);
      cache[i] = std::max(integrate_at(mode, t, target, pulse, beam, options, abs_tol), 0.0);
    }
    return cache[i];
  };
  std::size_t i = std::clamp<std::size_t>(start, 1, n_samples - 2);
  while (true) {
    if (value(i - 1) > value(i)) {
      --i;
    } else if (value(i + 1) > value(i)) {
      ++i;
    } else {
      break;
    }
    if (i == 0 || i + 1 == n_samples)
      throw WindowTooNarrowError("waveform maximum lies on the window boundary");
  }
  return peak_time(SampledWaveform{window.begin + dt * static_cast<double>(i - 1), dt,
                                   {value(i - 1), value(i), value(i + 1)}});
}

std::size_t peak_index(const SampledWaveform& w) {
  return static_cast<std::size_t>(
      std::distance(w.samples.begin(), std::max_element(w.samples.begin(), w.samples.end())));
}

double oracle_peak(IntegrationMode mode, const SurfaceTarget& target, const PulseParams& pulse,
                   const BeamGeometry& beam, TimeWindow window, std::size_t n_samples,
                   const WaveformOptions& options) {
  const auto restricted = sample(IntegrationMode::kRestricted2d, target, pulse, beam, window,
                                 n_samples, options);
  if (mode == IntegrationMode::kRestricted2d) return peak_time(restricted);
  return climb_peak(mode, target, pulse, beam, window, n_samples, options,
                    peak_index(restricted));
}

}  // namespace

double SampledWaveform::total_energy() const {
  if (samples.size() < 2) return 0.0;
  double sum = 0.5 * (samples.front() + samples.back());
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) sum += samples[i];
  return sum * dt;
}

TimeWindow default_time_window(const SurfaceTarget& target, const PulseParams& pulse) {
  const double centre = 2.0 * target.depth / kSpeedOfLight;
  return {centre - 4.0 * pulse.sigma(), centre + 4.0 * pulse.sigma()};
}

SampledWaveform return_waveform_2d(const SurfaceTarget& target, const PulseParams& pulse,
                                   const BeamGeometry& beam, TimeWindow window,
                                   std::size_t n_samples, const WaveformOptions& options) {
  return sample(IntegrationMode::kRestricted2d, target, pulse, beam, window, n_samples, options);
}

SampledWaveform return_waveform_full(const SurfaceTarget& target, const PulseParams& pulse,
                                     const BeamGeometry& beam, TimeWindow window,
                                     std::size_t n_samples, const WaveformOptions& options) {
  return sample(IntegrationMode::kFullSurface, target, pulse, beam, window, n_samples, options);
}

SampledWaveform return_waveform(IntegrationMode mode, const SurfaceTarget& target,
                                const PulseParams& pulse, const BeamGeometry& beam,
                                TimeWindow window, std::size_t n_samples,
                                const WaveformOptions& options) {
  return sample(mode, target, pulse, beam, window, n_samples, options);
}

double return_intensity(IntegrationMode mode, double t, const SurfaceTarget& target,
                        const PulseParams& pulse, const BeamGeometry& beam,
                        const WaveformOptions& options) {
  target.validate(beam.half_aperture());
  const double abs_tol =
      options.relative_tolerance * reference_scale(mode, target, pulse, beam);
  return std::max(integrate_at(mode, t, target, pulse, beam, options, abs_tol), 0.0);
}

double peak_time(const SampledWaveform& w) {
  const auto& s = w.samples;
  if (s.size() < 3) throw WindowTooNarrowError("peak_time needs at least three samples");
  const auto it = std::max_element(s.begin(), s.end());
  const auto i = static_cast<std::size_t>(std::distance(s.begin(), it));
  if (i == 0 || i + 1 == s.size())
    throw WindowTooNarrowError("waveform maximum lies on the window boundary");
  const double left = s[i - 1];
  const double mid = s[i];
  const double right = s[i + 1];
  const double curvature = left - 2.0 * mid + right;
  double offset = 0.0;
  if (curvature < 0.0) offset = 0.5 * (left - right) / curvature;
  return w.time_at(i) + offset * w.dt;
}

OraclePeakShift oracle_peak_shift(IntegrationMode mode, const SurfaceTarget& target,
                                  const PulseParams& pulse, const BeamGeometry& beam,
                                  std::size_t n_samples, const WaveformOptions& options) {
  const auto window = default_time_window(target, pulse);
  const double t_theta = oracle_peak(mode, target, pulse, beam, window, n_samples, options);
  const SurfaceTarget normal{target.depth, 0.0};
  const double t_ref = target.incidence == 0.0
                           ? t_theta
                           : oracle_peak(mode, normal, pulse, beam, window, n_samples, options);
  const double half_c = 0.5 * kSpeedOfLight;
  return {t_theta, t_ref, t_theta * half_c - target.depth, (t_theta - t_ref) * half_c};
}

}  // namespace lidar_bias
