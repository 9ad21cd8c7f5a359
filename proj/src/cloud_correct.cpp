#include "lidar_bias/cloud_correct.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/kd_tree.hpp"

namespace lidar_bias {
namespace {

struct PlaneFrame {
  Eigen::Vector3d normal;
  Eigen::Vector3d u;
  Eigen::Vector3d v;
};

Eigen::Matrix3d covariance(const Eigen::Matrix3Xd& pts) {
  const Eigen::Vector3d mean = pts.rowwise().mean();
  const Eigen::Matrix3Xd centered = pts.colwise() - mean;
  return centered * centered.transpose() / static_cast<double>(pts.cols());
}

// The whole cloud lies in one plane that also contains every viewpoint:
// a 2D scan, whose surface normals live inside the scan plane.
std::optional<PlaneFrame> scan_plane(const PointCloud& cloud, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(covariance(cloud.points));
  const Eigen::Vector3d lambda = solver.eigenvalues();
  if (!(lambda(2) > 0.0) || lambda(1) <= tol * lambda(2) || lambda(0) > tol * lambda(2))
    return std::nullopt;
  PlaneFrame frame{solver.eigenvectors().col(0), solver.eigenvectors().col(1),
                   solver.eigenvectors().col(2)};
  const Eigen::Vector3d centroid = cloud.points.rowwise().mean();
  const double reach = std::sqrt(lambda(2)) * 1e-6 + 1e-9;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (std::abs(frame.normal.dot(cloud.origin_of(i) - centroid)) > reach) return std::nullopt;
    if (!cloud.viewpoints) break;
  }
  return frame;
}

PlaneFrame best_fit_plane(const PointCloud& cloud) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(covariance(cloud.points));
  return {solver.eigenvectors().col(0), solver.eigenvectors().col(1),
          solver.eigenvectors().col(2)};
}

}  // namespace

PointCloud estimate_normals(const PointCloud& cloud, const NormalEstimationOptions& options) {
  if (options.k < 3) throw PreconditionError("estimate_normals: k must be at least 3");
  if (cloud.size() < options.k + 1)
    throw PreconditionError("estimate_normals: cloud needs at least k + 1 points");
  cloud.validate();

  std::optional<PlaneFrame> plane;
  switch (options.planar) {
    case PlanarMode::kAuto:
      plane = scan_plane(cloud, options.rank_tolerance);
      break;
    case PlanarMode::kAlways:
      plane = best_fit_plane(cloud);
      break;
    case PlanarMode::kNever:
      break;
  }

  const KdTree tree(cloud.points);
  PointCloud out = cloud;
  out.normals = Eigen::Matrix3Xd::Zero(3, cloud.points.cols());
  out.normal_valid.assign(cloud.size(), false);
  Eigen::Matrix3Xd neighbourhood(3, static_cast<Eigen::Index>(options.k + 1));

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const auto idx = tree.nearest(cloud.points.col(col), options.k + 1);
    for (std::size_t j = 0; j < idx.size(); ++j)
      neighbourhood.col(static_cast<Eigen::Index>(j)) = cloud.points.col(idx[j]);
    const Eigen::Matrix3d cov = covariance(neighbourhood);

    Eigen::Vector3d n;
    if (plane) {
      Eigen::Matrix<double, 3, 2> basis;
      basis << plane->u, plane->v;
      const Eigen::Matrix2d cov2 = basis.transpose() * cov * basis;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov2);
      if (!(solver.eigenvalues()(1) > 0.0)) continue;
      n = basis * solver.eigenvectors().col(0);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      const Eigen::Vector3d lambda = solver.eigenvalues();
      if (!(lambda(2) > 0.0) || lambda(1) <= options.rank_tolerance * lambda(2)) continue;
      n = solver.eigenvectors().col(0);
    }
    n.normalize();
    if (n.dot(cloud.origin_of(i) - cloud.points.col(col)) < 0.0) n = -n;
    out.normals->col(col) = n;
    out.normal_valid[i] = true;
  }
  if (std::all_of(out.normal_valid.begin(), out.normal_valid.end(), [](bool b) { return b; }))
    out.normal_valid.clear();
  return out;
}

double incidence_angle(const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                       const Eigen::Vector3d& sensor_origin) {
  const Eigen::Vector3d ray = sensor_origin - point;
  const double length = ray.norm();
  if (!(length > 0.0)) throw DomainError("incidence_angle: zero-length ray");
  const Eigen::Vector3d u = ray / length;
  return std::atan2(normal.cross(u).norm(), std::abs(normal.dot(u)));
}

CorrectedPoint correct_point(const Eigen::Vector3d& point, double theta, const SensorModel& model,
                             const PulseParams& pulse, const Eigen::Vector3d& sensor_origin,
                             const CorrectionOptions& options) {
  const Eigen::Vector3d ray = point - sensor_origin;
  const double d = ray.norm();
  if (!(d > 0.0)) throw DomainError("correct_point: point coincides with the sensor origin");
  const BiasEvaluation eval = evaluate_bias(d, theta, model, pulse, options.bias);
  const double range = d - eval.value;
  return {sensor_origin + ray * (range / d),
          eval.clamped() ? PointFlag::kClamped : PointFlag::kCorrected, range - d};
}

void write_report_summary(std::ostream& out, const CorrectionReport& report) {
  out << "points:         " << report.total() << '\n'
      << "corrected:      " << report.corrected_count << '\n'
      << "clamped:        " << report.clamped_count << '\n'
      << "skipped:        " << report.skipped_count << '\n'
      << "max correction: " << format_double(report.max_correction) << " m\n";
}

KeyValueMap to_key_values(const CorrectionReport& report) {
  return {{"total", std::to_string(report.total())},
          {"corrected", std::to_string(report.corrected_count)},
          {"clamped", std::to_string(report.clamped_count)},
          {"skipped", std::to_string(report.skipped_count)},
          {"max_correction_m", format_double(report.max_correction)}};
}

CorrectionOutcome correct_cloud(const PointCloud& cloud, const SensorModel& model,
                                const PulseParams& pulse, const CorrectionOptions& options) {
  if (cloud.corrected) throw PreconditionError("cloud is already bias-corrected");
  if (cloud.empty()) throw PreconditionError("correct_cloud: empty cloud");

  CorrectionOutcome outcome{cloud.has_normals() ? cloud : estimate_normals(cloud, options.normals),
                            {}};
  PointCloud& out = outcome.cloud;
  out.validate();
  CorrectionReport& report = outcome.report;
  report.flags.resize(out.size());

  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const Eigen::Vector3d origin = out.origin_of(i);
    const Eigen::Vector3d p = out.points.col(col);
    if (!out.normal_is_valid(i) || p == origin) {
      report.flags[i] = PointFlag::kSkipped;
      ++report.skipped_count;
      continue;
    }
    const double theta = incidence_angle(p, out.normals->col(col), origin);
    const CorrectedPoint cp = correct_point(p, theta, model, pulse, origin, options);
    out.points.col(col) = cp.point;
    report.flags[i] = cp.flag;
    if (cp.flag == PointFlag::kClamped) {
      ++report.clamped_count;
    } else {
      ++report.corrected_count;
    }
    report.max_correction = std::max(report.max_correction, std::abs(cp.shift));
  }
  out.corrected = true;
  return outcome;
}

PointCloud angle_cutoff_filter(const PointCloud& cloud, double theta_max) {
  if (!cloud.has_normals()) throw PreconditionError("angle_cutoff_filter: normals required");
  std::vector<bool> keep(cloud.size(), false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.normal_is_valid(i)) continue;
    const auto col = static_cast<Eigen::Index>(i);
    const Eigen::Vector3d p = cloud.points.col(col);
    const Eigen::Vector3d origin = cloud.origin_of(i);
    if (p == origin) continue;
    keep[i] = incidence_angle(p, cloud.normals->col(col), origin) <= theta_max;
  }
  return select(cloud, keep);
}

}  // namespace lidar_bias
