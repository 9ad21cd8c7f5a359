#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "lidar_bias/closed_form.hpp"

namespace lidar_bias {

/// Plain-text `key = value` configuration. '#' starts a comment, blank lines
/// are ignored, keys are unique.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::istream& in);
void write_key_values(std::ostream& out, const KeyValueMap& values);

/// Requires keys name, alpha_deg, s1, s2; other keys are ignored.
SensorModel sensor_model_from_key_values(const KeyValueMap& values);
KeyValueMap to_key_values(const SensorModel& model);

SensorModel read_sensor_config(std::istream& in);
SensorModel load_sensor_config(const std::filesystem::path& path);
void write_sensor_config(std::ostream& out, const SensorModel& model,
                         const KeyValueMap& extra = {});

/// Built-in model by name (case-insensitive: lms151, rs-lidar-16, hdl-32e).
std::optional<SensorModel> builtin_sensor(const std::string& name);

/// Loads `spec` as a file when it exists, otherwise as a built-in name.
SensorModel resolve_sensor(const std::string& spec);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace lidar_bias
