#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lidar_bias/calibration.hpp"
#include "lidar_bias/point_cloud.hpp"
#include "lidar_bias/sensor_config.hpp"
#include "lidar_bias/units.hpp"

using namespace lidar_bias;
using lidar_bias::testing::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  static TempDir scratch("cli_stderr");
  const auto err_path = scratch / "stderr.txt";
  const std::string cmd =
      std::string("'") + LIDAR_BIAS_CLI + "' " + args + " 2>'" + err_path.string() + "'";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_path);
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

KeyValueMap key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

}  // namespace

TEST(Cli, BiasPrintsSixDecimals) {
  auto r = run("bias --d 5 --theta-deg 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.000000\n");
  r = run("bias --d 10 --theta-deg 85 --sensor-config lms151");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "-0.296330\n");
  EXPECT_TRUE(r.err.empty());
  r = run(std::string("bias --d 10 --theta-deg 85 --sensor-config '") + LIDAR_BIAS_PRESET_DIR +
          "/rs-lidar-16.cfg'");
  EXPECT_EQ(r.out, "-0.366043\n");
}

TEST(Cli, BiasClampsWithWarning) {
  const auto r = run("bias --d 100 --theta-deg 60");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  std::ostringstream expected;
  expected.setf(std::ios::fixed);
  expected.precision(6);
  expected << bias_error(30.0, deg_to_rad(60.0), lms151_preset(), default_pulse()) << '\n';
  EXPECT_EQ(r.out, expected.str());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bias --d 5").code, 2);
  EXPECT_EQ(run("bias --d 5 --theta-deg 10 --bogus").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("bias --d -1 --theta-deg 10").code, 1);
  EXPECT_EQ(run("bias --d 5 --theta-deg 10 --sensor-config nosuch").code, 1);
  TempDir dir("cli_codes");
  EXPECT_EQ(run("isocurves --d-range 0.1 10 --out " + q(dir / "g.csv")).code, 2);
  EXPECT_EQ(run("simulate-waveform --d 5 --theta-deg 10 --tau-ns -3 --out " + q(dir / "w.csv")).code, 2);
}

TEST(Cli, SimulateWaveform) {
  TempDir dir("cli_wave");
  auto r = run("simulate-waveform --d 5 --theta-deg 0 --out " + q(dir / "a.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("peak at"), std::string::npos);
  std::ifstream in(dir / "a.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t_seconds,intensity");
  double best_t = 0.0;
  double best_v = -1.0;
  double prev_t = -1.0;
  double dt = 0.0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    if (prev_t >= 0.0) dt = t - prev_t;
    prev_t = t;
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  EXPECT_NEAR(best_t, 10.0 / kSpeedOfLight, dt);

  r = run("simulate-waveform --d 5 --theta-deg 0 --out " + q(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));

  r = run("simulate-waveform --d 5 --theta-deg 80 --out " + q(dir / "c.csv"));
  ASSERT_EQ(r.code, 0);
  const auto at = r.err.find("peak at ") + 8;
  const double peak = std::stod(r.err.substr(at));
  EXPECT_LT(peak, 10.0 / kSpeedOfLight);
}

TEST(Cli, Isocurves) {
  TempDir dir("cli_iso");
  const auto r = run("isocurves --d-range 1 10 --theta-range 0 85 --resolution 10 --out " +
                     q(dir / "g.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir / "g.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "d_m,theta_deg,error_m");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 101);
  run("isocurves --d-range 1 10 --theta-range 0 85 --resolution 10 --out " + q(dir / "h.csv"));
  EXPECT_EQ(text, slurp(dir / "h.csv"));
}

TEST(Cli, FitRecoversNoiselessParameters) {
  TempDir dir("cli_fit");
  const auto m = hdl32e_preset();
  std::vector<MeasurementRecord> recs;
  for (const auto& s : lidar_bias::testing::bench_samples(m)) {
    for (double sign : {-1.0, 1.0}) {
      MeasurementRecord r;
      r.sensor = m.name();
      r.depth = s.depth;
      r.incidence_deg = sign * rad_to_deg(s.incidence);
      r.error = s.error;
      recs.push_back(r);
    }
  }
  {
    std::ofstream out(dir / "data.csv");
    write_measurement_csv(out, recs);
  }
  const auto r = run("fit --data " + q(dir / "data.csv") + " --alpha-deg 0.085 --name fitted --out-config " +
                     q(dir / "fit.cfg"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fitted = load_sensor_config(dir / "fit.cfg");
  EXPECT_EQ(fitted.name(), "fitted");
  EXPECT_NEAR(fitted.s1() / m.s1(), 1.0, 1e-8);
  EXPECT_NEAR(fitted.s2() / m.s2(), 1.0, 1e-8);
  const auto kv = key_values(r.out);
  EXPECT_NEAR(std::stod(kv.at("s1")), m.s1(), 1e-6);
  EXPECT_EQ(key_values(slurp(dir / "fit.cfg")).at("samples"), "96");
}

TEST(Cli, CorrectNormalIncidencePlaneIsUnchanged) {
  TempDir dir("cli_correct");
  PointCloud c;
  c.points.resize(3, 100);
  c.normals = Eigen::Matrix3Xd(3, 100);
  for (int i = 0; i < 100; ++i) {
    const double a = 0.01 * i;
    const Eigen::Vector3d u(std::cos(a), std::sin(a), 0.0);
    c.points.col(i) = 4.0 * u;
    c.normals->col(i) = -u;
  }
  save_point_cloud(dir / "in.ply", c);
  const auto r = run("correct --in " + q(dir / "in.ply") + " --out " + q(dir / "out.ply") +
                     " --report " + q(dir / "report.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = load_point_cloud(dir / "out.ply");
  EXPECT_EQ(out.points, c.points);
  EXPECT_TRUE(out.corrected);
  EXPECT_EQ(key_values(slurp(dir / "report.txt")).at("corrected"), "100");
  EXPECT_EQ(run("correct --in " + q(dir / "out.ply") + " --out " + q(dir / "again.ply")).code, 2);
}

TEST(Cli, CorridorDemo) {
  TempDir dir("cli_demo");
  auto r = run("corridor-demo --preset 2d --correction on --out-dir " + q(dir.path()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = key_values(r.out);
  const double unc = std::stod(kv.at("uncorrected_rms_dev_m"));
  const double cor = std::stod(kv.at("corrected_rms_dev_m"));
  EXPECT_GT(unc, 0.0);
  EXPECT_LE(cor, 0.2 * unc);
  for (const char* f : {"world_uncorrected.ply", "world_corrected.ply", "bend_uncorrected.txt",
                        "bend_corrected.txt", "centerline_uncorrected.csv",
                        "centerline_corrected.csv", "correction_report.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;

  TempDir off_dir("cli_demo_off");
  r = run("corridor-demo --correction off --out-dir " + q(off_dir.path()));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(key_values(r.out).count("ratio"), 0u);
  EXPECT_FALSE(std::filesystem::exists(off_dir / "world_corrected.ply"));
  EXPECT_EQ(slurp(dir / "bend_uncorrected.txt"), slurp(off_dir / "bend_uncorrected.txt"));
}
