#include "lidar_bias/corridor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/sensor_config.hpp"

namespace lidar_bias {
namespace {

Eigen::Vector3d inward_normal(Surface s) {
  switch (s) {
    case Surface::kLeftWall:
      return -Eigen::Vector3d::UnitY();
    case Surface::kRightWall:
      return Eigen::Vector3d::UnitY();
    case Surface::kFloor:
      return Eigen::Vector3d::UnitZ();
    case Surface::kCeiling:
      return -Eigen::Vector3d::UnitZ();
  }
  return Eigen::Vector3d::Zero();
}

struct Hit {
  double range;
  Surface surface;
};

std::optional<Hit> cast(const Eigen::Vector3d& o, const Eigen::Vector3d& dir,
                        const CorridorSpec& spec) {
  const double half = spec.width / 2.0;
  std::optional<Hit> best;
  auto consider = [&](double t, Surface s) {
    if (t > 0.0 && (!best || t < best->range)) best = Hit{t, s};
  };
  if (dir.y() > 0.0) consider((half - o.y()) / dir.y(), Surface::kLeftWall);
  if (dir.y() < 0.0) consider((-half - o.y()) / dir.y(), Surface::kRightWall);
  if (spec.is_3d()) {
    if (dir.z() < 0.0) consider(-o.z() / dir.z(), Surface::kFloor);
    if (dir.z() > 0.0) consider((spec.height - o.z()) / dir.z(), Surface::kCeiling);
  }
  if (!best) return std::nullopt;
  const double x = o.x() + best->range * dir.x();
  if (x < 0.0 || x > spec.length) return std::nullopt;
  return best;
}

void append(LabeledCloud& out, const LabeledCloud& in, const Eigen::Isometry3d& tf,
            Eigen::Index& col) {
  for (std::size_t i = 0; i < in.size(); ++i, ++col) {
    const auto src = static_cast<Eigen::Index>(i);
    out.cloud.points.col(col) = tf * Eigen::Vector3d(in.cloud.points.col(src));
    if (out.cloud.normals) {
      out.cloud.normals->col(col) = tf.linear() * in.cloud.normals->col(src);
      out.cloud.normal_valid.push_back(in.cloud.normal_is_valid(i));
    }
    out.cloud.viewpoints->col(col) = tf * in.cloud.origin_of(i);
    out.surface.push_back(in.surface[i]);
    out.true_incidence.push_back(in.true_incidence[i]);
    out.true_range.push_back(in.true_range[i]);
  }
}

// Keeps the labels of `cloud` while replacing its geometry.
LabeledCloud relabel(const LabeledCloud& labels, PointCloud cloud) {
  LabeledCloud out = labels;
  out.cloud = std::move(cloud);
  return out;
}

PointCloud strip_normals(PointCloud cloud) {
  cloud.normals.reset();
  cloud.normal_valid.clear();
  return cloud;
}

double max_range_error(const LabeledCloud& corrected, const CorrectionReport& report,
                       std::size_t offset) {
  double worst = 0.0;
  for (std::size_t i = 0; i < corrected.size(); ++i) {
    if (report.flags[offset + i] == PointFlag::kSkipped) continue;
    const double range =
        (corrected.cloud.points.col(static_cast<Eigen::Index>(i)) - corrected.cloud.origin_of(i))
            .norm();
    worst = std::max(worst, std::abs(range - corrected.true_range[i]));
  }
  return worst;
}

void merge(CorrectionReport& total, const CorrectionReport& part) {
  total.corrected_count += part.corrected_count;
  total.clamped_count += part.clamped_count;
  total.skipped_count += part.skipped_count;
  total.max_correction = std::max(total.max_correction, part.max_correction);
  total.flags.insert(total.flags.end(), part.flags.begin(), part.flags.end());
}

}  // namespace

void CorridorSpec::validate() const {
  if (!(length > 0.0) || !(width > 0.0) || !(height >= 0.0) || !(wall_sampling_density > 0.0) ||
      !std::isfinite(length) || !std::isfinite(width) || !std::isfinite(height))
    throw PreconditionError("corridor dimensions must be positive and finite");
}

Eigen::Isometry3d ScanPose::sensor_to_world() const {
  Eigen::Isometry3d tf = Eigen::Isometry3d::Identity();
  tf.translate(position);
  tf.rotate(Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()));
  return tf;
}

RayPattern RayPattern::fan_2d(std::size_t count, double fov, double max_range) {
  if (count < 2 || !(fov > 0.0)) throw PreconditionError("fan_2d: need >= 2 rays and fov > 0");
  RayPattern p;
  p.max_range = max_range;
  p.directions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = -fov / 2.0 + fov * static_cast<double>(i) / static_cast<double>(count - 1);
    p.directions.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  return p;
}

RayPattern RayPattern::rings_3d(std::size_t rings, double elev_min, double elev_max,
                                std::size_t azimuth_steps, double max_range) {
  if (rings < 2 || azimuth_steps < 1 || !(elev_max > elev_min))
    throw PreconditionError("rings_3d: need >= 2 rings, >= 1 azimuth step, elev_max > elev_min");
  RayPattern p;
  p.max_range = max_range;
  p.directions.reserve(rings * azimuth_steps);
  for (std::size_t r = 0; r < rings; ++r) {
    const double el = elev_min + (elev_max - elev_min) * static_cast<double>(r) /
                                     static_cast<double>(rings - 1);
    for (std::size_t j = 0; j < azimuth_steps; ++j) {
      const double az = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(j) /
                                                static_cast<double>(azimuth_steps);
      p.directions.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                std::sin(el));
    }
  }
  return p;
}

double biased_range(double true_range, double theta, const SensorModel& model,
                    const PulseParams& pulse, const BiasOptions& options) {
  double m = true_range;
  for (int i = 0; i < 200; ++i) {
    const double next = true_range + evaluate_bias(m, theta, model, pulse, options).value;
    if (std::abs(next - m) <= 4.0 * std::numeric_limits<double>::epsilon() * true_range)
      return next;
    m = next;
  }
  throw NumericError("biased_range: fixed-point iteration did not converge", m, 0.0);
}

LabeledCloud simulate_scan(const ScanPose& pose, const CorridorSpec& spec,
                           const SensorModel& sensor, const PulseParams& pulse,
                           const RayPattern& pattern, const SimulationOptions& options) {
  spec.validate();
  if (pattern.directions.empty()) throw PreconditionError("simulate_scan: empty ray pattern");
  const Eigen::Vector3d& o = pose.position;
  if (!o.allFinite() || !std::isfinite(pose.heading) || o.x() < 0.0 || o.x() > spec.length ||
      std::abs(o.y()) >= spec.width / 2.0 ||
      (spec.is_3d() && (o.z() <= 0.0 || o.z() >= spec.height)))
    throw PreconditionError("simulate_scan: pose outside the corridor");

  const Eigen::Isometry3d tf = pose.sensor_to_world();
  const Eigen::Matrix3d rot = tf.linear();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.range_noise_sigma);
  double floor_credit = 0.0;

  std::vector<Eigen::Vector3d> pts;
  std::vector<Eigen::Vector3d> nrm;
  LabeledCloud out;
  for (const auto& dir_s : pattern.directions) {
    const Eigen::Vector3d dir = rot * dir_s.normalized();
    const auto hit = cast(o, dir, spec);
    if (!hit || hit->range < pattern.min_range || hit->range > pattern.max_range) {
      ++out.dropped;
      continue;
    }
    if (hit->surface == Surface::kFloor) {
      floor_credit += options.floor_keep_fraction;
      if (floor_credit < 1.0) continue;
      floor_credit -= 1.0;
    }
    const Eigen::Vector3d n = inward_normal(hit->surface);
    const double theta = std::atan2(n.cross(dir).norm(), std::abs(n.dot(dir)));
    double m = hit->range;
    if (options.inject_bias) m = biased_range(hit->range, theta, sensor, pulse, options.bias);
    if (options.range_noise_sigma > 0.0) m += noise(rng);
    pts.push_back(dir_s.normalized() * m);
    nrm.push_back(rot.transpose() * n);
    out.surface.push_back(hit->surface);
    out.true_incidence.push_back(theta);
    out.true_range.push_back(hit->range);
  }
  const auto count = static_cast<Eigen::Index>(pts.size());
  out.cloud.points.resize(3, count);
  out.cloud.normals = Eigen::Matrix3Xd(3, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    out.cloud.points.col(i) = pts[static_cast<std::size_t>(i)];
    out.cloud.normals->col(i) = nrm[static_cast<std::size_t>(i)];
  }
  return out;
}

LabeledCloud accumulate(const std::vector<std::pair<ScanPose, LabeledCloud>>& scans) {
  std::size_t total = 0;
  bool all_normals = !scans.empty();
  for (const auto& [pose, scan] : scans) {
    total += scan.size();
    all_normals = all_normals && scan.cloud.has_normals();
  }
  LabeledCloud out;
  const auto n = static_cast<Eigen::Index>(total);
  out.cloud.points.resize(3, n);
  out.cloud.viewpoints = Eigen::Matrix3Xd(3, n);
  if (all_normals) out.cloud.normals = Eigen::Matrix3Xd(3, n);
  Eigen::Index col = 0;
  for (const auto& [pose, scan] : scans) {
    append(out, scan, pose.sensor_to_world(), col);
    out.dropped += scan.dropped;
  }
  if (std::all_of(out.cloud.normal_valid.begin(), out.cloud.normal_valid.end(),
                  [](bool b) { return b; }))
    out.cloud.normal_valid.clear();
  return out;
}

LabeledCloud sample_corridor(const CorridorSpec& spec) {
  spec.validate();
  const double step = 1.0 / spec.wall_sampling_density;
  const auto along = static_cast<std::size_t>(std::floor(spec.length / step)) + 1;
  const auto up =
      spec.is_3d() ? static_cast<std::size_t>(std::floor(spec.height / step)) + 1 : std::size_t{1};
  const auto across = static_cast<std::size_t>(std::floor(spec.width / step)) + 1;
  const double half = spec.width / 2.0;

  std::vector<Eigen::Vector3d> pts;
  LabeledCloud out;
  auto add = [&](const Eigen::Vector3d& p, Surface s) {
    pts.push_back(p);
    out.surface.push_back(s);
    out.true_incidence.push_back(0.0);
    out.true_range.push_back(0.0);
  };
  for (std::size_t i = 0; i < along; ++i) {
    const double x = static_cast<double>(i) * step;
    for (std::size_t k = 0; k < up; ++k) {
      const double z = static_cast<double>(k) * step;
      add({x, half, z}, Surface::kLeftWall);
      add({x, -half, z}, Surface::kRightWall);
    }
    if (!spec.is_3d()) continue;
    for (std::size_t j = 0; j < across; ++j) {
      const double y = -half + static_cast<double>(j) * step;
      add({x, y, 0.0}, Surface::kFloor);
      add({x, y, spec.height}, Surface::kCeiling);
    }
  }
  const auto n = static_cast<Eigen::Index>(pts.size());
  out.cloud.points.resize(3, n);
  out.cloud.normals = Eigen::Matrix3Xd(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.cloud.points.col(i) = pts[static_cast<std::size_t>(i)];
    out.cloud.normals->col(i) = inward_normal(out.surface[static_cast<std::size_t>(i)]);
  }
  return out;
}

BendMetric bend_metric(const LabeledCloud& cloud, const CorridorSpec& spec, double bin_length) {
  spec.validate();
  if (!(bin_length > 0.0)) throw PreconditionError("bend_metric: bin length must be positive");
  if (cloud.surface.size() != cloud.size())
    throw PreconditionError("bend_metric: cloud lacks surface labels");

  const auto nbins = static_cast<std::size_t>(std::ceil(spec.length / bin_length));
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::vector<Acc> left(nbins), right(nbins), vert(nbins);
  std::vector<std::size_t> counts(nbins, 0);
  const double half = spec.width / 2.0;

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.cloud.points.col(static_cast<Eigen::Index>(i));
    if (p.x() < 0.0 || p.x() > spec.length) continue;
    const auto b = std::min(nbins - 1, static_cast<std::size_t>(p.x() / bin_length));
    ++counts[b];
    switch (cloud.surface[i]) {
      case Surface::kLeftWall:
        left[b].sum += p.y() - half;
        ++left[b].n;
        break;
      case Surface::kRightWall:
        right[b].sum += p.y() + half;
        ++right[b].n;
        break;
      case Surface::kFloor:
        vert[b].sum += p.z();
        ++vert[b].n;
        break;
      case Surface::kCeiling:
        vert[b].sum += p.z() - spec.height;
        ++vert[b].n;
        break;
    }
  }

  BendMetric metric;
  double sq = 0.0;
  std::size_t terms = 0;
  for (std::size_t b = 0; b < nbins; ++b) {
    CenterlineBin bin;
    bin.x_center = (static_cast<double>(b) + 0.5) * bin_length;
    bin.points = counts[b];
    if (left[b].n >= kMinPointsPerBin && right[b].n >= kMinPointsPerBin) {
      bin.lateral = 0.5 * (left[b].sum / static_cast<double>(left[b].n) +
                           right[b].sum / static_cast<double>(right[b].n));
      metric.max_lateral_dev = std::max(metric.max_lateral_dev, std::abs(*bin.lateral));
      sq += *bin.lateral * *bin.lateral;
      ++terms;
    }
    if (spec.is_3d() && vert[b].n >= kMinPointsPerBin) {
      bin.vertical = vert[b].sum / static_cast<double>(vert[b].n);
      metric.max_vertical_dev = std::max(metric.max_vertical_dev, std::abs(*bin.vertical));
      sq += *bin.vertical * *bin.vertical;
      ++terms;
    }
    metric.bins.push_back(bin);
  }
  metric.rms_dev = terms > 0 ? std::sqrt(sq / static_cast<double>(terms)) : 0.0;
  return metric;
}

void write_bend_metric(std::ostream& out, const BendMetric& metric) {
  std::size_t used = 0;
  for (const auto& b : metric.bins) used += (b.lateral || b.vertical) ? 1 : 0;
  write_key_values(out, {{"max_lateral_dev_m", format_double(metric.max_lateral_dev)},
                         {"max_vertical_dev_m", format_double(metric.max_vertical_dev)},
                         {"rms_dev_m", format_double(metric.rms_dev)},
                         {"bins", std::to_string(metric.bins.size())},
                         {"bins_used", std::to_string(used)}});
}

void write_centerline_csv(std::ostream& out, const BendMetric& metric) {
  out << "x_m,lateral_m,vertical_m,points\n";
  for (const auto& b : metric.bins) {
    out << format_double(b.x_center) << ',';
    if (b.lateral) out << format_double(*b.lateral);
    out << ',';
    if (b.vertical) out << format_double(*b.vertical);
    out << ',' << b.points << '\n';
  }
}

DemoSetup preset_2d() {
  DemoSetup s{CorridorSpec{}, {}, lms151_preset(),
              RayPattern::fan_2d(541, deg_to_rad(270.0), 30.0), SimulationOptions{}, 1.0};
  for (double x = 0.0; x <= s.spec.length + 1e-9; x += 0.5)
    s.trajectory.push_back({{x, s.spec.width / 2.0 - 0.5, 0.0}, 0.0});
  return s;
}

DemoSetup preset_3d() {
  CorridorSpec spec;
  spec.height = 2.5;
  DemoSetup s{spec, {}, hdl32e_preset(),
              RayPattern::rings_3d(16, deg_to_rad(-30.67), deg_to_rad(10.67), 180, 30.0),
              SimulationOptions{}, 1.0};
  s.simulation.floor_keep_fraction = 0.5;
  for (double x = 0.0; x <= spec.length + 1e-9; x += 1.0)
    s.trajectory.push_back({{x, 0.0, spec.height / 2.0}, 0.0});
  return s;
}

DemoResult demo_pipeline(const DemoSetup& setup, const PulseParams& pulse,
                         const DemoOptions& options) {
  setup.spec.validate();
  if (setup.trajectory.empty()) throw PreconditionError("demo_pipeline: empty trajectory");

  std::vector<std::pair<ScanPose, LabeledCloud>> scans;
  scans.reserve(setup.trajectory.size());
  for (std::size_t i = 0; i < setup.trajectory.size(); ++i) {
    SimulationOptions sim = setup.simulation;
    sim.seed = setup.simulation.seed + i;
    scans.emplace_back(setup.trajectory[i], simulate_scan(setup.trajectory[i], setup.spec,
                                                          setup.sensor, pulse, setup.pattern, sim));
  }

  DemoResult result;
  result.world_uncorrected = accumulate(scans);
  result.uncorrected = bend_metric(result.world_uncorrected, setup.spec, setup.bin_length);
  if (!options.correction) {
    result.world_corrected = result.world_uncorrected;
    result.corrected = result.uncorrected;
    return result;
  }

  const auto prepare = [&](const PointCloud& c) {
    return options.normals == NormalSource::kExact ? c : strip_normals(c);
  };
  if (options.stage == CorrectionStage::kPerScan) {
    std::vector<std::pair<ScanPose, LabeledCloud>> corrected;
    corrected.reserve(scans.size());
    for (const auto& [pose, scan] : scans) {
      auto outcome =
          correct_cloud(prepare(scan.cloud), setup.sensor, pulse, options.correction_options);
      const std::size_t offset = result.report.flags.size();
      merge(result.report, outcome.report);
      corrected.emplace_back(pose, relabel(scan, std::move(outcome.cloud)));
      result.max_range_error =
          std::max(result.max_range_error, max_range_error(corrected.back().second,
                                                           result.report, offset));
    }
    result.world_corrected = accumulate(corrected);
  } else {
    auto outcome = correct_cloud(prepare(result.world_uncorrected.cloud), setup.sensor, pulse,
                                 options.correction_options);
    result.report = std::move(outcome.report);
    result.world_corrected = relabel(result.world_uncorrected, std::move(outcome.cloud));
    result.max_range_error = max_range_error(result.world_corrected, result.report, 0);
  }
  result.world_corrected.cloud.corrected = true;
  result.corrected = bend_metric(result.world_corrected, setup.spec, setup.bin_length);
  return result;
}

}  // namespace lidar_bias
