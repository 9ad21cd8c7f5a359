#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace lidar_bias {

/// Points in metres, one per column. Normals, when present, are unit columns
/// aligned with `points`; `normal_valid` marks the ones that could be
/// estimated (empty means all valid). Per-point `viewpoints` override
/// `sensor_origin` for clouds accumulated from several scans.
struct PointCloud {
  Eigen::Matrix3Xd points;
  std::optional<Eigen::Matrix3Xd> normals;
  std::vector<bool> normal_valid;
  Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
  std::optional<Eigen::Matrix3Xd> viewpoints;
  bool corrected = false;  ///< range-bias correction already applied

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return points.cols() == 0; }
  bool has_normals() const { return normals.has_value(); }

  bool normal_is_valid(std::size_t i) const {
    return has_normals() && (normal_valid.empty() || normal_valid[i]);
  }

  Eigen::Vector3d origin_of(std::size_t i) const {
    return viewpoints ? Eigen::Vector3d(viewpoints->col(static_cast<Eigen::Index>(i)))
                      : sensor_origin;
  }

  /// Throws PreconditionError on size mismatches or non-unit valid normals.
  void validate() const;
};

/// Copy of the points (and attached per-point data) selected by `keep`.
PointCloud select(const PointCloud& cloud, const std::vector<bool>& keep);

// ASCII PLY: element `vertex` with x, y, z and optional nx, ny, nz. Sensor
// origin and the corrected flag travel as `comment` lines.
PointCloud read_ply(std::istream& in);
void write_ply(std::ostream& out, const PointCloud& cloud);

// CSV with header `x,y,z` or `x,y,z,nx,ny,nz`; `#` lines carry the same
// metadata as the PLY comments.
PointCloud read_cloud_csv(std::istream& in);
void write_cloud_csv(std::ostream& out, const PointCloud& cloud);

/// Dispatches on the extension (.ply or .csv).
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace lidar_bias
