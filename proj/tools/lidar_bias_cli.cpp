#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "lidar_bias/calibration.hpp"
#include "lidar_bias/closed_form.hpp"
#include "lidar_bias/cloud_correct.hpp"
#include "lidar_bias/corridor_sim.hpp"
#include "lidar_bias/errors.hpp"
#include "lidar_bias/sensor_config.hpp"
#include "lidar_bias/units.hpp"
#include "lidar_bias/waveform.hpp"

namespace lb = lidar_bias;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

lb::PulseParams pulse_from(double peak_power, double tau_ns) {
  try {
    return {peak_power, tau_ns * 1e-9};
  } catch (const lb::DomainError& e) {
    throw UsageError(e.what());
  }
}

void warn_domain(const lb::BiasEvaluation& ev, double d, double theta_deg) {
  if (ev.depth_clamped)
    std::cerr << "warning: depth " << d << " m outside the validity domain, evaluated at "
              << ev.depth << " m\n";
  if (ev.incidence_clamped)
    std::cerr << "warning: incidence " << theta_deg
              << " deg outside the validity domain, evaluated at "
              << lb::rad_to_deg(ev.incidence) << " deg\n";
  if (ev.extrapolated && !ev.depth_clamped)
    std::cerr << "warning: depth " << d << " m beyond the calibrated range, extrapolating\n";
}

struct WaveformArgs {
  double d = 5.0;
  double theta_deg = 0.0;
  std::string sensor = "lms151";
  std::string mode = "2d";
  std::string out;
  std::size_t samples = lb::kDefaultSampleCount;
  double peak_power = 0.39;
  double tau_ns = 50.0;
};

int run_waveform(const WaveformArgs& a) {
  const auto model = lb::resolve_sensor(a.sensor);
  const auto pulse = pulse_from(a.peak_power, a.tau_ns);
  const lb::SurfaceTarget target{a.d, lb::deg_to_rad(a.theta_deg)};
  const auto mode =
      a.mode == "full" ? lb::IntegrationMode::kFullSurface : lb::IntegrationMode::kRestricted2d;
  const auto w = lb::return_waveform(mode, target, pulse, model.beam(lb::kDefaultWavelength),
                                     lb::default_time_window(target, pulse), a.samples);
  auto out = open_output(a.out);
  out << "t_seconds,intensity\n";
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    out << lb::format_double(w.time_at(i)) << ',' << lb::format_double(w.samples[i]) << '\n';
  std::cerr << "peak at " << lb::format_double(lb::peak_time(w)) << " s (2d/c = "
            << lb::format_double(2.0 * a.d / lb::kSpeedOfLight) << " s)\n";
  return 0;
}

struct BiasArgs {
  double d = 0.0;
  double theta_deg = 0.0;
  std::string sensor = "lms151";
};

int run_bias(const BiasArgs& a) {
  const auto model = lb::resolve_sensor(a.sensor);
  const auto ev = lb::evaluate_bias(a.d, lb::deg_to_rad(a.theta_deg), model, lb::default_pulse());
  warn_domain(ev, a.d, a.theta_deg);
  std::cout << std::fixed << std::setprecision(6) << ev.value << '\n';
  return 0;
}

struct IsocurveArgs {
  std::string sensor = "lms151";
  std::pair<double, double> d_range{1.0, 10.0};
  std::pair<double, double> theta_range{0.0, 85.0};
  std::size_t resolution = 50;
  std::string out;
};

int run_isocurves(const IsocurveArgs& a) {
  const auto model = lb::resolve_sensor(a.sensor);
  lb::IsocurveGrid grid;
  try {
    grid = lb::isocurve_grid(model, lb::default_pulse(), a.d_range.first, a.d_range.second,
                             a.theta_range.first, a.theta_range.second, a.resolution,
                             a.resolution);
  } catch (const lb::DomainError& e) {
    throw UsageError(e.what());
  }
  auto out = open_output(a.out);
  lb::write_isocurve_csv(out, grid);
  return 0;
}

struct FitArgs {
  std::string data;
  double alpha_deg = 0.0;
  std::string out_config;
  std::string name = "fitted";
  std::string loss = "huber";
};

int run_fit(const FitArgs& a) {
  const auto records = lb::load_measurement_csv(a.data);
  const auto samples = lb::to_samples(lb::symmetric_average(records));
  const auto loss = a.loss == "squared" ? lb::RobustLoss::squared() : lb::RobustLoss::huber();
  const auto fit =
      lb::fit_scale_factors(samples, lb::deg_to_rad(a.alpha_deg), lb::default_pulse(), loss);
  if (!fit.converged) std::cerr << "warning: robust fit hit the iteration limit\n";
  const auto model = fit.to_model(a.name, lb::deg_to_rad(a.alpha_deg));
  auto out = open_output(a.out_config);
  lb::write_sensor_config(out, model,
                          {{"residual_rms_m", lb::format_double(fit.residual_rms)},
                           {"iterations", std::to_string(fit.iterations)},
                           {"samples", std::to_string(samples.size())}});
  lb::write_key_values(std::cout, {{"s1", lb::format_double(fit.s1)},
                                   {"s2", lb::format_double(fit.s2)},
                                   {"residual_rms_m", lb::format_double(fit.residual_rms)}});
  return 0;
}

struct CorrectArgs {
  std::string in;
  std::string sensor = "lms151";
  std::size_t k = 20;
  std::string out;
  std::string report;
  double theta_max_deg = 85.0;
};

int run_correct(const CorrectArgs& a) {
  const auto model = lb::resolve_sensor(a.sensor);
  const auto cloud = lb::load_point_cloud(a.in);
  auto options = lb::CorrectionOptions::with_theta_max(lb::deg_to_rad(a.theta_max_deg));
  options.normals.k = a.k;
  const auto outcome = lb::correct_cloud(cloud, model, lb::default_pulse(), options);
  lb::save_point_cloud(a.out, outcome.cloud);
  if (!a.report.empty()) {
    auto rep = open_output(a.report);
    lb::write_key_values(rep, lb::to_key_values(outcome.report));
  }
  lb::write_report_summary(std::cerr, outcome.report);
  return 0;
}

struct DemoArgs {
  std::string preset = "2d";
  std::string correction = "on";
  std::string normals = "estimated";
  std::string out_dir = ".";
};

int run_demo(const DemoArgs& a) {
  const auto setup = a.preset == "3d" ? lb::preset_3d() : lb::preset_2d();
  lb::DemoOptions options;
  options.correction = a.correction == "on";
  options.normals =
      a.normals == "exact" ? lb::NormalSource::kExact : lb::NormalSource::kEstimated;
  const auto result = lb::demo_pipeline(setup, lb::default_pulse(), options);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  lb::save_point_cloud(dir / "world_uncorrected.ply", result.world_uncorrected.cloud);
  {
    auto out = open_output(dir / "bend_uncorrected.txt");
    lb::write_bend_metric(out, result.uncorrected);
    auto csv = open_output(dir / "centerline_uncorrected.csv");
    lb::write_centerline_csv(csv, result.uncorrected);
  }
  if (options.correction) {
    lb::save_point_cloud(dir / "world_corrected.ply", result.world_corrected.cloud);
    auto out = open_output(dir / "bend_corrected.txt");
    lb::write_bend_metric(out, result.corrected);
    auto csv = open_output(dir / "centerline_corrected.csv");
    lb::write_centerline_csv(csv, result.corrected);
    auto rep = open_output(dir / "correction_report.txt");
    lb::write_key_values(rep, lb::to_key_values(result.report));
  }

  lb::KeyValueMap summary{{"uncorrected_rms_dev_m", lb::format_double(result.uncorrected.rms_dev)}};
  if (options.correction) {
    summary["corrected_rms_dev_m"] = lb::format_double(result.corrected.rms_dev);
    summary["ratio"] = lb::format_double(result.corrected.rms_dev / result.uncorrected.rms_dev);
  }
  lb::write_key_values(std::cout, summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incidence-angle range bias model for time-of-flight LIDARs"};
  app.require_subcommand(1);

  WaveformArgs wave;
  auto* sw = app.add_subcommand("simulate-waveform", "Sample the return waveform to CSV");
  sw->add_option("--d", wave.d, "Depth [m]")->required();
  sw->add_option("--theta-deg", wave.theta_deg, "Incidence [deg]")->required();
  sw->add_option("--sensor-config", wave.sensor, "Config file or preset name");
  sw->add_option("--mode", wave.mode, "2d or full")->check(CLI::IsMember({"2d", "full"}));
  sw->add_option("--out", wave.out, "Output CSV")->required();
  sw->add_option("--samples", wave.samples, "Sample count")->check(CLI::Range(64, 1 << 20));
  sw->add_option("--peak-power", wave.peak_power, "Pulse peak power [W]");
  sw->add_option("--tau-ns", wave.tau_ns, "Pulse length [ns]");

  BiasArgs bias;
  auto* sb = app.add_subcommand("bias", "Print the bias e(d, theta) in metres");
  sb->add_option("--d", bias.d, "Depth [m]")->required();
  sb->add_option("--theta-deg", bias.theta_deg, "Incidence [deg]")->required();
  sb->add_option("--sensor-config", bias.sensor, "Config file or preset name");

  IsocurveArgs iso;
  auto* si = app.add_subcommand("isocurves", "Write the bias grid as CSV");
  si->add_option("--sensor-config", iso.sensor, "Config file or preset name");
  si->add_option("--d-range", iso.d_range, "Depth range MIN MAX [m]");
  si->add_option("--theta-range", iso.theta_range, "Incidence range MIN MAX [deg]");
  si->add_option("--resolution", iso.resolution, "Samples per axis")->check(CLI::Range(2, 10000));
  si->add_option("--out", iso.out, "Output CSV")->required();

  FitArgs fit;
  auto* sf = app.add_subcommand("fit", "Fit s1, s2 to a measurement CSV");
  sf->add_option("--data", fit.data, "Measurement CSV")->required()->check(CLI::ExistingFile);
  sf->add_option("--alpha-deg", fit.alpha_deg, "Beam half aperture [deg]")->required();
  sf->add_option("--out-config", fit.out_config, "Output sensor config")->required();
  sf->add_option("--name", fit.name, "Model name");
  sf->add_option("--loss", fit.loss, "huber or squared")->check(CLI::IsMember({"huber", "squared"}));

  CorrectArgs corr;
  auto* sc = app.add_subcommand("correct", "Remove the bias from a point cloud");
  sc->add_option("--in", corr.in, "Input PLY or CSV")->required()->check(CLI::ExistingFile);
  sc->add_option("--sensor-config", corr.sensor, "Config file or preset name");
  sc->add_option("--k", corr.k, "Neighbours for normal estimation")->check(CLI::Range(3, 100000));
  sc->add_option("--out", corr.out, "Output PLY or CSV")->required();
  sc->add_option("--report", corr.report, "Key/value report file");
  sc->add_option("--theta-max-deg", corr.theta_max_deg, "Largest incidence corrected [deg]")
      ->check(CLI::Range(0.0, 90.0));

  DemoArgs demo;
  auto* sd = app.add_subcommand("corridor-demo", "Simulated corridor drift before/after correction");
  sd->add_option("--preset", demo.preset, "2d or 3d")->check(CLI::IsMember({"2d", "3d"}));
  sd->add_option("--correction", demo.correction, "on or off")->check(CLI::IsMember({"on", "off"}));
  sd->add_option("--normals", demo.normals, "exact or estimated")
      ->check(CLI::IsMember({"exact", "estimated"}));
  sd->add_option("--out-dir", demo.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sw->parsed()) return run_waveform(wave);
    if (sb->parsed()) return run_bias(bias);
    if (si->parsed()) return run_isocurves(iso);
    if (sf->parsed()) return run_fit(fit);
    if (sc->parsed()) return run_correct(corr);
    if (sd->parsed()) return run_demo(demo);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const lb::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
