#include "lidar_bias/point_cloud.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/sensor_config.hpp"

namespace lidar_bias {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

double parse(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("bad number '" + s + "'");
  return v;
}

// "sensor_origin x y z" / "corrected" metadata shared by both formats
bool apply_metadata(const std::string& text, PointCloud& cloud) {
  std::istringstream ss(text);
  std::string key;
  ss >> key;
  if (key == "sensor_origin") {
    std::array<std::string, 3> v;
    if (!(ss >> v[0] >> v[1] >> v[2])) throw ParseError("malformed sensor_origin metadata");
    cloud.sensor_origin = {parse(v[0]), parse(v[1]), parse(v[2])};
    return true;
  }
  if (key == "corrected") {
    cloud.corrected = true;
    return true;
  }
  return false;
}

void write_metadata(std::ostream& out, const PointCloud& cloud, const char* prefix) {
  out << prefix << "sensor_origin " << format_double(cloud.sensor_origin.x()) << ' '
      << format_double(cloud.sensor_origin.y()) << ' ' << format_double(cloud.sensor_origin.z())
      << '\n';
  if (cloud.corrected) out << prefix << "corrected\n";
}

void fill(PointCloud& cloud, const std::vector<std::array<double, 6>>& rows, bool with_normals) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  cloud.points.resize(3, n);
  if (with_normals) cloud.normals = Eigen::Matrix3Xd(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    cloud.points.col(i) << r[0], r[1], r[2];
    if (with_normals) cloud.normals->col(i) << r[3], r[4], r[5];
  }
  if (with_normals) {
    // zero normals mark points whose normal could not be estimated
    cloud.normal_valid.assign(rows.size(), true);
    bool any_invalid = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cloud.normals->col(i).squaredNorm() == 0.0) {
        cloud.normal_valid[static_cast<std::size_t>(i)] = false;
        any_invalid = true;
      }
    }
    if (!any_invalid) cloud.normal_valid.clear();
  }
}

}  // namespace

void PointCloud::validate() const {
  if (normals) {
    if (normals->cols() != points.cols())
      throw PreconditionError("normal count differs from point count");
    if (!normal_valid.empty() && normal_valid.size() != size())
      throw PreconditionError("normal validity flags differ from point count");
    for (std::size_t i = 0; i < size(); ++i) {
      if (!normal_is_valid(i)) continue;
      if (std::abs(normals->col(static_cast<Eigen::Index>(i)).norm() - 1.0) > 1e-9)
        throw PreconditionError("normals must have unit norm");
    }
  }
  if (viewpoints && viewpoints->cols() != points.cols())
    throw PreconditionError("viewpoint count differs from point count");
}

PointCloud select(const PointCloud& cloud, const std::vector<bool>& keep) {
  if (keep.size() != cloud.size()) throw PreconditionError("select: mask size mismatch");
  const auto n = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
  PointCloud out;
  out.sensor_origin = cloud.sensor_origin;
  out.corrected = cloud.corrected;
  out.points.resize(3, n);
  if (cloud.normals) out.normals = Eigen::Matrix3Xd(3, n);
  if (cloud.viewpoints) out.viewpoints = Eigen::Matrix3Xd(3, n);
  Eigen::Index j = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!keep[i]) continue;
    const auto src = static_cast<Eigen::Index>(i);
    out.points.col(j) = cloud.points.col(src);
    if (cloud.normals) out.normals->col(j) = cloud.normals->col(src);
    if (cloud.viewpoints) out.viewpoints->col(j) = cloud.viewpoints->col(src);
    if (!cloud.normal_valid.empty()) out.normal_valid.push_back(cloud.normal_valid[i]);
    ++j;
  }
  return out;
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ply") throw ParseError("not a PLY file");
  PointCloud cloud;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  std::vector<std::pair<std::string, std::size_t>> elements_before;  // skipped elements
  std::vector<std::size_t> skip_after;
  while (std::getline(in, line)) {
    line = trim(line);
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw ParseError("only ASCII PLY is supported");
    } else if (word == "comment") {
      std::string rest;
      std::getline(ss, rest);
      apply_metadata(trim(rest), cloud);
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ss >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      } else if (!seen_vertex) {
        elements_before.emplace_back(name, count);
      } else {
        skip_after.push_back(count);
      }
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ss >> type;
      if (type == "list") throw ParseError("list properties on vertices are not supported");
      ss >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!seen_vertex) throw ParseError("PLY has no vertex element");
  for (const auto& [name, count] : elements_before)
    for (std::size_t i = 0; i < count; ++i) std::getline(in, line);

  auto index_of = [&](const std::string& n) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == n) return static_cast<int>(i);
    return -1;
  };
  const std::array<int, 6> idx{index_of("x"),  index_of("y"),  index_of("z"),
                               index_of("nx"), index_of("ny"), index_of("nz")};
  if (idx[0] < 0 || idx[1] < 0 || idx[2] < 0) throw ParseError("PLY vertex lacks x, y, z");
  const bool with_normals = idx[3] >= 0 && idx[4] >= 0 && idx[5] >= 0;

  std::vector<std::array<double, 6>> rows;
  rows.reserve(vertex_count);
  std::vector<std::string> fields(props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!std::getline(in, line)) throw ParseError("PLY ends before all vertices");
    std::istringstream ss(line);
    for (auto& f : fields)
      if (!(ss >> f)) throw ParseError("PLY vertex line has too few values");
    std::array<double, 6> r{};
    for (std::size_t k = 0; k < (with_normals ? 6u : 3u); ++k)
      r[k] = parse(fields[static_cast<std::size_t>(idx[k])]);
    rows.push_back(r);
  }
  fill(cloud, rows, with_normals);
  cloud.validate();
  return cloud;
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\n";
  write_metadata(out, cloud, "comment ");
  out << "element vertex " << cloud.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out << format_double(cloud.points(0, c)) << ' ' << format_double(cloud.points(1, c)) << ' '
        << format_double(cloud.points(2, c));
    if (cloud.normals) {
      const Eigen::Vector3d n =
          cloud.normal_is_valid(i) ? Eigen::Vector3d(cloud.normals->col(c)) : Eigen::Vector3d::Zero();
      out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
          << format_double(n.z());
    }
    out << '\n';
  }
}

PointCloud read_cloud_csv(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      apply_metadata(trim(line.substr(1)), cloud);
      continue;
    }
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(trim(f));
    break;
  }
  const std::vector<std::string> xyz{"x", "y", "z"};
  const std::vector<std::string> xyzn{"x", "y", "z", "nx", "ny", "nz"};
  if (header != xyz && header != xyzn) throw ParseError("cloud CSV header must be x,y,z[,nx,ny,nz]");
  const bool with_normals = header.size() == 6;
  std::vector<std::array<double, 6>> rows;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      apply_metadata(trim(line.substr(1)), cloud);
      continue;
    }
    std::stringstream ss(line);
    std::string f;
    std::array<double, 6> r{};
    std::size_t k = 0;
    while (std::getline(ss, f, ',')) {
      if (k >= header.size()) throw ParseError("cloud CSV row has too many fields");
      r[k++] = parse(trim(f));
    }
    if (k != header.size()) throw ParseError("cloud CSV row has too few fields");
    rows.push_back(r);
  }
  fill(cloud, rows, with_normals);
  cloud.validate();
  return cloud;
}

void write_cloud_csv(std::ostream& out, const PointCloud& cloud) {
  write_metadata(out, cloud, "# ");
  out << (cloud.normals ? "x,y,z,nx,ny,nz\n" : "x,y,z\n");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out << format_double(cloud.points(0, c)) << ',' << format_double(cloud.points(1, c)) << ','
        << format_double(cloud.points(2, c));
    if (cloud.normals) {
      const Eigen::Vector3d n =
          cloud.normal_is_valid(i) ? Eigen::Vector3d(cloud.normals->col(c)) : Eigen::Vector3d::Zero();
      out << ',' << format_double(n.x()) << ',' << format_double(n.y()) << ','
          << format_double(n.z());
    }
    out << '\n';
  }
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  const auto ext = path.extension().string();
  if (ext == ".ply" || ext == ".PLY") return read_ply(in);
  if (ext == ".csv" || ext == ".CSV") return read_cloud_csv(in);
  throw ParseError("unsupported point cloud extension '" + ext + "'");
}

void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  const auto ext = path.extension().string();
  if (ext == ".ply" || ext == ".PLY") {
    write_ply(out, cloud);
  } else if (ext == ".csv" || ext == ".CSV") {
    write_cloud_csv(out, cloud);
  } else {
    throw ParseError("unsupported point cloud extension '" + ext + "'");
  }
}

}  // namespace lidar_bias
