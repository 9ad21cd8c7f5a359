#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lidar_bias/closed_form.hpp"
#include "lidar_bias/cloud_correct.hpp"
#include "lidar_bias/point_cloud.hpp"

namespace lidar_bias {

/// Straight corridor along +x from x = 0 to `length`, walls at y = +-width/2,
/// floor at z = 0 and ceiling at z = height (height 0: walls only, 2D).
struct CorridorSpec {
  double length = 94.0;
  double width = 2.0;
  double height = 0.0;
  double wall_sampling_density = 20.0;  ///< points per metre for exact samples

  void validate() const;
  bool is_3d() const { return height > 0.0; }
};

struct ScanPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double heading = 0.0;  ///< yaw about +z

  Eigen::Isometry3d sensor_to_world() const;
};

/// Unit ray directions in the sensor frame and the usable range interval.
struct RayPattern {
  std::vector<Eigen::Vector3d> directions;
  double min_range = 0.05;
  double max_range = 30.0;

  /// `count` rays evenly spread over `fov` radians centred on +x, in z = 0.
  static RayPattern fan_2d(std::size_t count, double fov, double max_range);
  /// `rings` elevation rings in [elev_min, elev_max], `azimuth_steps` per ring.
  static RayPattern rings_3d(std::size_t rings, double elev_min, double elev_max,
                             std::size_t azimuth_steps, double max_range);
};

enum class Surface : std::uint8_t { kLeftWall, kRightWall, kFloor, kCeiling };

struct SimulationOptions {
  bool inject_bias = true;
  BiasOptions bias{};
  double range_noise_sigma = 0.0;  ///< Gaussian range noise [m], 0 disables
  std::uint64_t seed = 0;
  double floor_keep_fraction = 1.0;  ///< fraction of floor returns kept
};

/// A cloud with its ground-truth side channel.
struct LabeledCloud {
  PointCloud cloud;
  std::vector<Surface> surface;
  std::vector<double> true_incidence;  ///< [rad]
  std::vector<double> true_range;      ///< [m]
  std::size_t dropped = 0;             ///< rays without a return

  std::size_t size() const { return cloud.size(); }
};

/// Measured range m of a surface at true range d: m - e(m, theta) = d.
/// This is the exact inverse of the correction d = m - e(m, theta).
double biased_range(double true_range, double theta, const SensorModel& model,
                    const PulseParams& pulse, const BiasOptions& options = {});

/// Casts every ray from `pose`, intersects the corridor and shortens each
/// range by the sensor's bias. Points are in the sensor frame, with exact
/// surface normals facing the sensor.
LabeledCloud simulate_scan(const ScanPose& pose, const CorridorSpec& spec,
                           const SensorModel& sensor, const PulseParams& pulse,
                           const RayPattern& pattern, const SimulationOptions& options = {});

/// Rigidly moves each scan to the world frame and concatenates. Per-point
/// viewpoints keep the scan positions.
LabeledCloud accumulate(const std::vector<std::pair<ScanPose, LabeledCloud>>& scans);

/// Exact wall (and floor/ceiling) samples at `wall_sampling_density`.
LabeledCloud sample_corridor(const CorridorSpec& spec);

struct CenterlineBin {
  double x_center = 0.0;
  std::optional<double> lateral;   ///< signed, +y is towards the left wall
  std::optional<double> vertical;  ///< signed, +z is up
  std::size_t points = 0;
};

struct BendMetric {
  double max_lateral_dev = 0.0;
  double max_vertical_dev = 0.0;
  double rms_dev = 0.0;
  std::vector<CenterlineBin> bins;
};

inline constexpr std::size_t kMinPointsPerBin = 10;

/// Per longitudinal bin: the lateral centreline is the midpoint of the mean
/// left-wall and right-wall y; the vertical deviation is the point-weighted
/// mean displacement of floor and ceiling returns. Bins where a surface has
/// fewer than kMinPointsPerBin points leave that component empty.
BendMetric bend_metric(const LabeledCloud& cloud, const CorridorSpec& spec,
                       double bin_length = 1.0);

void write_bend_metric(std::ostream& out, const BendMetric& metric);
void write_centerline_csv(std::ostream& out, const BendMetric& metric);

enum class NormalSource { kExact, kEstimated };

/// Where the correction runs: on each scan in its own frame, or once on the
/// accumulated world cloud using the per-point viewpoints.
enum class CorrectionStage { kPerScan, kAccumulated };

struct DemoSetup {
  CorridorSpec spec;
  std::vector<ScanPose> trajectory;
  SensorModel sensor;
  RayPattern pattern;
  SimulationOptions simulation;
  double bin_length = 1.0;
};

/// 94 m x 2 m corridor, LMS151 model, 541-ray 270 degree fan, poses every
/// 0.5 m at 0.5 m from the left wall.
DemoSetup preset_2d();
/// HDL-32E model in a 94 x 2 x 2.5 m corridor, 16 rings, floor returns halved.
DemoSetup preset_3d();

struct DemoOptions {
  bool correction = true;
  NormalSource normals = NormalSource::kEstimated;
  CorrectionStage stage = CorrectionStage::kPerScan;
  CorrectionOptions correction_options{};
};

struct DemoResult {
  BendMetric uncorrected;
  BendMetric corrected;  ///< equals `uncorrected` when correction is off
  LabeledCloud world_uncorrected;
  LabeledCloud world_corrected;
  CorrectionReport report;
  double max_range_error = 0.0;  ///< max |corrected range - true range| [m]
};

/// Simulates every pose, corrects each scan in its own frame when enabled,
/// accumulates with the known poses and measures the bend before and after.
DemoResult demo_pipeline(const DemoSetup& setup, const PulseParams& pulse,
                         const DemoOptions& options = {});

}  // namespace lidar_bias
