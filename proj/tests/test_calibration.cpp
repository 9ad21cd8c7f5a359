#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lidar_bias/calibration.hpp"
#include "lidar_bias/errors.hpp"
#include "lidar_bias/units.hpp"

using namespace lidar_bias;
using lidar_bias::testing::add_noise;
using lidar_bias::testing::bench_samples;

namespace {

const PulseParams kPulse = default_pulse();

MeasurementRecord rec(double d, double theta_deg, double e) {
  MeasurementRecord r;
  r.sensor = "LMS151";
  r.depth = d;
  r.incidence_deg = theta_deg;
  r.error = e;
  return r;
}

}  // namespace

TEST(CorrectedDistance, Examples) {
  const SetupGeometry g{0.1, 0.01, 0.02};
  EXPECT_NEAR(corrected_distance(10.0, 0.0, g), 10.0 - 0.1 + 0.02, 1e-15);
  EXPECT_NEAR(corrected_distance(10.0, deg_to_rad(60.0), g), 9.9226794919243112270, 1e-13);
  const SetupGeometry sym{0.1, 0.0, 0.02};
  EXPECT_DOUBLE_EQ(corrected_distance(4.0, 0.7, sym), corrected_distance(4.0, -0.7, sym));
  EXPECT_THROW(corrected_distance(4.0, std::numbers::pi / 2, sym), DomainError);
}

TEST(MeasurementError, Definition) {
  const SetupGeometry g{0.1, 0.01, 0.02};
  MeasurementRecord r;
  r.interferometer = 5.0;
  r.incidence_deg = 30.0;
  const double dc = corrected_distance(5.0, deg_to_rad(30.0), g);
  r.depth = dc;
  EXPECT_EQ(measurement_error(r, g), 0.0);
  r.depth = dc - 0.05;
  EXPECT_NEAR(measurement_error(r, g), -0.05, 1e-15);
}

TEST(MeasurementError, RecoversInjectedBias) {
  const SetupGeometry g{0.12, 0.004, 0.03};
  const auto m = lms151_preset();
  for (double d : bench_depths()) {
    for (double t : bench_incidences_deg()) {
      for (double sign : {-1.0, 1.0}) {
        MeasurementRecord r;
        r.incidence_deg = sign * t;
        r.interferometer = d;
        const double e = bias_error(d, deg_to_rad(t), m, kPulse);
        r.depth = corrected_distance(d, deg_to_rad(r.incidence_deg), g) + e;
        EXPECT_NEAR(measurement_error(r, g), e, 1e-12);
      }
    }
  }
}

TEST(EstimateDeltaZ, MeanAtNormalIncidence) {
  std::vector<MeasurementRecord> rs;
  for (double off : {0.10, 0.12, 0.14}) {
    MeasurementRecord r;
    r.interferometer = 3.0;
    r.depth = 3.0 + off;
    rs.push_back(r);
  }
  MeasurementRecord tilted;
  tilted.interferometer = 3.0;
  tilted.depth = 9.0;
  tilted.incidence_deg = 30.0;
  rs.push_back(tilted);
  EXPECT_NEAR(estimate_delta_z(rs), 0.12, 1e-12);
  EXPECT_THROW(estimate_delta_z({tilted}), PreconditionError);
}

TEST(SymmetricAverage, PairsSignsAndPassesSingletons) {
  const auto out = symmetric_average({rec(5, 70, -0.03), rec(5, -70, -0.05), rec(5, 80, -0.07)});
  ASSERT_EQ(out.size(), 2u);
  const auto& p = *std::find_if(out.begin(), out.end(), [](auto& a) { return a.incidence_deg < 75; });
  EXPECT_DOUBLE_EQ(p.depth, 5.0);
  EXPECT_DOUBLE_EQ(p.incidence_deg, 70.0);
  EXPECT_NEAR(p.error, -0.04, 1e-15);
  EXPECT_TRUE(p.paired);
  const auto& s = *std::find_if(out.begin(), out.end(), [](auto& a) { return a.incidence_deg > 75; });
  EXPECT_NEAR(s.error, -0.07, 1e-15);
  EXPECT_FALSE(s.paired);
}

TEST(SymmetricAverage, PairsWithinAngleTolerance) {
  const auto out = symmetric_average({rec(5, 69.9, -0.03), rec(5, -70.1, -0.05)});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].paired);
  EXPECT_NEAR(out[0].error, -0.04, 1e-15);
  const auto apart = symmetric_average({rec(5, 69.0, -0.03), rec(5, -70.0, -0.05)});
  EXPECT_EQ(apart.size(), 2u);
}

TEST(SymmetricAverage, EmptyAndMissingError) {
  EXPECT_TRUE(symmetric_average(std::vector<MeasurementRecord>{}).empty());
  MeasurementRecord r;
  r.depth = 1.0;
  EXPECT_THROW(symmetric_average({r}), PreconditionError);
}

TEST(SymmetricAverage, CancelsLateralOffset) {
  const SetupGeometry g{0.0, 0.02, 0.0};
  std::vector<MeasurementRecord> rs;
  for (double sign : {-1.0, 1.0}) {
    MeasurementRecord r;
    r.interferometer = 4.0;
    r.incidence_deg = sign * 40.0;
    r.depth = 4.0 - 0.01;
    rs.push_back(r);
  }
  const auto out = symmetric_average(rs, g);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].error, -0.01, 1e-15);
}

TEST(BenchGrid, TwelveAnglesEightDepths) {
  EXPECT_EQ(bench_incidences_deg().size(), 12u);
  EXPECT_EQ(bench_depths().size(), 8u);
  EXPECT_EQ(bench_samples(lms151_preset()).size(), 96u);
}

TEST(FitScaleFactors, NoiselessRecovery) {
  for (const auto& m : {lms151_preset(), rs_lidar16_preset(), hdl32e_preset()}) {
    const auto data = bench_samples(m);
    for (auto loss : {RobustLoss::squared(), RobustLoss::huber()}) {
      const auto fit = fit_scale_factors(data, m.half_aperture(), kPulse, loss);
      EXPECT_NEAR(fit.s1 / m.s1(), 1.0, 1e-8);
      EXPECT_NEAR(fit.s2 / m.s2(), 1.0, 1e-8);
      EXPECT_GE(fit.iterations, 1);
      EXPECT_GE(fit.residual_rms, 0.0);
      EXPECT_LT(fit.residual_rms, 1e-12);
    }
  }
}

TEST(FitScaleFactors, RobustMatchesOrdinaryWithoutOutliers) {
  const auto m = lms151_preset();
  const auto data = bench_samples(m);
  const auto ols = fit_scale_factors(data, m.half_aperture(), kPulse, RobustLoss::squared());
  const auto hub = fit_scale_factors(data, m.half_aperture(), kPulse, RobustLoss::huber());
  EXPECT_NEAR(hub.s1 / ols.s1, 1.0, 1e-6);
  EXPECT_NEAR(hub.s2 / ols.s2, 1.0, 1e-6);
}

TEST(FitScaleFactors, HuberDownweightsGrossOutliers) {
  const auto m = lms151_preset();
  auto data = bench_samples(m);
  add_noise(data, 0.005, 7);
  data[40].error += 0.5;
  data[80].error -= 0.5;
  const auto hub = fit_scale_factors(data, m.half_aperture(), kPulse, RobustLoss::huber());
  EXPECT_TRUE(hub.converged);
  ASSERT_EQ(hub.weights.size(), 96);
  EXPECT_LT(hub.weights(40), 0.1);
  EXPECT_LT(hub.weights(80), 0.1);
  EXPECT_GT(hub.scale, 0.0);
  const auto ols = fit_scale_factors(data, m.half_aperture(), kPulse, RobustLoss::squared());
  EXPECT_LT(std::abs(hub.s1 - m.s1()), std::abs(ols.s1 - m.s1()));
}

TEST(FitScaleFactors, Deterministic) {
  const auto m = rs_lidar16_preset();
  auto data = bench_samples(m);
  add_noise(data, 0.005, 3);
  const auto a = fit_scale_factors(data, m.half_aperture(), kPulse);
  const auto b = fit_scale_factors(data, m.half_aperture(), kPulse);
  EXPECT_EQ(a.s1, b.s1);
  EXPECT_EQ(a.s2, b.s2);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.residual_rms, b.residual_rms);
}

TEST(FitScaleFactors, RejectsDegenerateInput) {
  const auto m = lms151_preset();
  std::vector<CalibrationSample> same_angle;
  for (double d : bench_depths()) same_angle.push_back({d, 0.0, 0.0});
  same_angle.push_back({3.0, 0.5, -0.01});
  EXPECT_THROW(fit_scale_factors(same_angle, m.half_aperture(), kPulse), PreconditionError);
  std::vector<CalibrationSample> zeros;
  for (double d : bench_depths()) zeros.push_back({d, 0.0, 0.0});
  EXPECT_THROW(fit_scale_factors(zeros, m.half_aperture(), kPulse), PreconditionError);

  Eigen::MatrixX2d x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  EXPECT_THROW(fit_linear_robust(x, Eigen::Vector4d(1, 2, 3, 4)), FitError);
}

TEST(FitScaleFactors, InsensitiveToPeakPowerAndWavelength) {
  const auto m = lms151_preset();
  auto data = bench_samples(m);
  add_noise(data, 0.005, 11);
  const auto base = fit_scale_factors(data, m.half_aperture(), kPulse);
  const PulseParams strong{kPulse.peak_power() * 10.0, kPulse.pulse_length()};
  const auto p = fit_scale_factors(data, m.half_aperture(), strong);
  const auto w = fit_scale_factors(data, m.half_aperture(), kPulse, {}, 2.0 * kDefaultWavelength);
  EXPECT_NEAR(p.s1 / base.s1, 1.0, 1e-6);
  EXPECT_NEAR(p.s2 / base.s2, 1.0, 1e-6);
  EXPECT_NEAR(w.s1 / base.s1, 1.0, 1e-6);
  EXPECT_NEAR(w.s2 / base.s2, 1.0, 1e-6);
}

TEST(FitScaleFactors, PulseWidthChangesSurfaceLittle) {
  const auto m = lms151_preset();
  const auto data = bench_samples(m);
  double sq = 0.0;
  double ref = 0.0;
  for (double tau_ns : {25.0, 100.0}) {
    const PulseParams p{kPulse.peak_power(), tau_ns * 1e-9};
    const auto fit = fit_scale_factors(data, m.half_aperture(), p);
    const auto refit = fit.to_model("refit", m.half_aperture());
    for (const auto& s : data) {
      const double diff = bias_error(s.depth, s.incidence, refit, p) - s.error;
      sq += diff * diff;
      ref += s.error * s.error;
    }
  }
  EXPECT_LE(std::sqrt(sq / ref), 0.02);
}

TEST(Pfister, RecoversOwnModel) {
  const PfisterModel truth{0.01, -0.002, -0.001, 4.0};
  std::vector<CalibrationSample> data;
  for (double d : bench_depths())
    for (double t : bench_incidences_deg()) data.push_back({d, deg_to_rad(t), truth(d, deg_to_rad(t))});
  const auto fit = fit_pfister(data);
  EXPECT_NEAR(fit.model.c0, truth.c0, 1e-6);
  EXPECT_NEAR(fit.model.b, truth.b, 1e-6);
  EXPECT_NEAR(fit.model.a, truth.a, 1e-6);
  EXPECT_NEAR(fit.model.k, truth.k, 1e-6);
  EXPECT_LT(fit.residual_rms, 1e-9);
}

TEST(Pfister, ConstantDataTieBreak) {
  std::vector<CalibrationSample> data;
  for (double d : {1.0, 5.0})
    for (double t : {10.0, 50.0, 80.0}) data.push_back({d, deg_to_rad(t), -0.02});
  const auto fit = fit_pfister(data);
  EXPECT_NEAR(fit.model.c0, -0.02, 1e-12);
  EXPECT_EQ(fit.model.b, 0.0);
  EXPECT_EQ(fit.model.a, 0.0);
  EXPECT_EQ(fit.model.k, 0.0);
}

TEST(Pfister, MissesDepthIncidenceCoupling) {
  const auto m = lms151_preset();
  const auto data = bench_samples(m);
  const auto pf = fit_pfister(data);
  EXPECT_GT(pf.residual_rms, residual_rms(data, m, kPulse));

  const double t10 = deg_to_rad(10.0);
  const double t80 = deg_to_rad(80.0);
  const double slope10 = bias_error(10.0, t10, m, kPulse) - bias_error(2.0, t10, m, kPulse);
  const double slope80 = bias_error(10.0, t80, m, kPulse) - bias_error(2.0, t80, m, kPulse);
  EXPECT_GT(std::abs(slope80), std::abs(slope10));
  EXPECT_NEAR(pf.model(10.0, t10) - pf.model(2.0, t10), pf.model(10.0, t80) - pf.model(2.0, t80),
              1e-12);
}

TEST(Pfister, Preconditions) {
  EXPECT_THROW(fit_pfister({{1, 0.1, 0}, {2, 0.2, 0}, {3, 0.3, 0}}), PreconditionError);
  EXPECT_THROW(fit_pfister({{1, 0.1, 0}, {1, 0.2, 0}, {1, 0.3, 0}, {1, 0.4, 0}}), PreconditionError);
}

TEST(Isocurves, GridProperties) {
  const auto m = lms151_preset();
  const auto g = isocurve_grid(m, kPulse, 1.0, 10.0, 0.0, 85.0, 10, 18);
  ASSERT_EQ(g.error.rows(), 10);
  ASSERT_EQ(g.error.cols(), 18);
  EXPECT_DOUBLE_EQ(g.depths.front(), 1.0);
  EXPECT_DOUBLE_EQ(g.depths.back(), 10.0);
  EXPECT_DOUBLE_EQ(g.incidences_deg.back(), 85.0);
  EXPECT_TRUE(g.error.allFinite());
  EXPECT_TRUE((g.error.col(0).array() == 0.0).all());
  const double peak = g.error.cwiseAbs().maxCoeff();
  EXPECT_GT(peak, 0.1);
  EXPECT_LT(peak, 0.5);

  std::ostringstream a;
  std::ostringstream b;
  write_isocurve_csv(a, g);
  write_isocurve_csv(b, isocurve_grid(m, kPulse, 1.0, 10.0, 0.0, 85.0, 10, 18));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "d_m,theta_deg,error_m");

  EXPECT_THROW(isocurve_grid(m, kPulse, 0.1, 10.0, 0.0, 85.0, 4, 4), DomainError);
  EXPECT_THROW(isocurve_grid(m, kPulse, 1.0, 10.0, 0.0, 89.0, 4, 4), DomainError);
  EXPECT_THROW(isocurve_grid(m, kPulse, 1.0, 10.0, 0.0, 85.0, 0, 4), PreconditionError);
}

TEST(MeasurementCsv, RoundTrip) {
  std::vector<MeasurementRecord> rs{rec(5, 70, -0.03), rec(2.5, -10, 0.001)};
  rs[1].dispersion = 0.0021;
  std::stringstream buf;
  write_measurement_csv(buf, rs);
  const auto back = read_measurement_csv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].depth, 2.5);
  EXPECT_EQ(back[1].incidence_deg, -10.0);
  EXPECT_EQ(*back[1].error, 0.001);
  EXPECT_EQ(back[1].dispersion, 0.0021);
  EXPECT_EQ(back[0].sensor, "LMS151");
}

TEST(MeasurementCsv, RejectsBadInput) {
  std::istringstream header("sensor,d,theta\n");
  EXPECT_THROW(read_measurement_csv(header), ParseError);
  std::istringstream fields("sensor,d_m,theta_deg,error_m,dispersion_m\nX,1,2\n");
  EXPECT_THROW(read_measurement_csv(fields), ParseError);
  std::istringstream number("sensor,d_m,theta_deg,error_m,dispersion_m\nX,1,2x,0,0\n");
  EXPECT_THROW(read_measurement_csv(number), ParseError);
  std::istringstream domain("sensor,d_m,theta_deg,error_m,dispersion_m\nX,-1,2,0,0\n");
  EXPECT_THROW(read_measurement_csv(domain), DomainError);
}
