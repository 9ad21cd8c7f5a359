#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lidar_bias/closed_form.hpp"
#include "lidar_bias/point_cloud.hpp"
#include "lidar_bias/sensor_config.hpp"

namespace lidar_bias {

enum class PlanarMode { kAuto, kAlways, kNever };

struct NormalEstimationOptions {
  std::size_t k = 20;
  /// Clouds lying in one plane (2D scans) get normals inside that plane.
  PlanarMode planar = PlanarMode::kAuto;
  /// Eigenvalue ratio below which the neighbourhood is treated as rank deficient.
  double rank_tolerance = 1e-10;
};

/// PCA normals from the k nearest neighbours (plus the point itself),
/// oriented towards the point's sensor origin.
PointCloud estimate_normals(const PointCloud& cloud, const NormalEstimationOptions& options = {});

/// Angle between the surface normal and the ray back to the sensor, in
/// [0, pi/2]. The normal's orientation does not matter.
double incidence_angle(const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                       const Eigen::Vector3d& sensor_origin);

enum class PointFlag : std::uint8_t { kCorrected, kClamped, kSkipped };

struct CorrectionOptions {
  NormalEstimationOptions normals{};
  BiasOptions bias{};  ///< bias.domain.incidence_max caps the correction angle

  static CorrectionOptions with_theta_max(double theta_max) {
    CorrectionOptions o;
    o.bias.domain.incidence_max = theta_max;
    return o;
  }
};

struct CorrectedPoint {
  Eigen::Vector3d point;
  PointFlag flag;
  double shift;  ///< range change applied [m], >= 0
};

/// Moves the point along its ray to range d - e(d, theta), d being the
/// measured range. Points with theta or d outside the validity domain use
/// the clamped bias and are flagged kClamped.
CorrectedPoint correct_point(const Eigen::Vector3d& point, double theta, const SensorModel& model,
                             const PulseParams& pulse, const Eigen::Vector3d& sensor_origin,
                             const CorrectionOptions& options = {});

struct CorrectionReport {
  std::size_t corrected_count = 0;
  std::size_t clamped_count = 0;
  std::size_t skipped_count = 0;
  double max_correction = 0.0;
  std::vector<PointFlag> flags;

  std::size_t total() const { return corrected_count + clamped_count + skipped_count; }
};

void write_report_summary(std::ostream& out, const CorrectionReport& report);
KeyValueMap to_key_values(const CorrectionReport& report);

struct CorrectionOutcome {
  PointCloud cloud;
  CorrectionReport report;
};

/// Normals (estimated when the cloud has none), incidence, then per-point
/// correction. The output is marked corrected; correcting a cloud that is
/// already marked throws PreconditionError.
CorrectionOutcome correct_cloud(const PointCloud& cloud, const SensorModel& model,
                                const PulseParams& pulse, const CorrectionOptions& options = {});

/// Keeps the points whose incidence is at most theta_max. Points without a
/// valid normal are dropped.
PointCloud angle_cutoff_filter(const PointCloud& cloud, double theta_max);

}  // namespace lidar_bias
