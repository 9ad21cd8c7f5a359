#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lidar_bias/calibration.hpp"
#include "lidar_bias/closed_form.hpp"
#include "lidar_bias/units.hpp"

namespace lidar_bias::testing {

/// Twelve bench angles x eight depths, errors generated by `model`.
inline std::vector<CalibrationSample> bench_samples(const SensorModel& model,
                                                    const PulseParams& pulse = default_pulse()) {
  std::vector<CalibrationSample> out;
  for (double d : bench_depths())
    for (double t : bench_incidences_deg())
      out.push_back({d, deg_to_rad(t), bias_error(d, deg_to_rad(t), model, pulse)});
  return out;
}

inline void add_noise(std::vector<CalibrationSample>& data, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& s : data) s.error += noise(rng);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lidar_bias_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lidar_bias::testing
