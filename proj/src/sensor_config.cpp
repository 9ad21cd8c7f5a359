#include "lidar_bias/sensor_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

namespace lidar_bias {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

double parse_number(const KeyValueMap& values, const std::string& key) {
  const auto it = values.find(key);
  if (it == values.end()) throw ParseError("sensor config: missing key '" + key + "'");
  const std::string& text = it->second;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("sensor config: '" + key + "' is not a number: " + text);
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

KeyValueMap parse_key_values(std::istream& in) {
  KeyValueMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return out;
}

void write_key_values(std::ostream& out, const KeyValueMap& values) {
  for (const auto& [key, value] : values) out << key << " = " << value << '\n';
}

SensorModel sensor_model_from_key_values(const KeyValueMap& values) {
  const auto name = values.find("name");
  if (name == values.end() || name->second.empty())
    throw ParseError("sensor config: missing key 'name'");
  return {name->second, deg_to_rad(parse_number(values, "alpha_deg")),
          parse_number(values, "s1"), parse_number(values, "s2")};
}

KeyValueMap to_key_values(const SensorModel& model) {
  return {{"name", model.name()},
          {"alpha_deg", format_double(rad_to_deg(model.half_aperture()))},
          {"s1", format_double(model.s1())},
          {"s2", format_double(model.s2())}};
}

SensorModel read_sensor_config(std::istream& in) {
  return sensor_model_from_key_values(parse_key_values(in));
}

SensorModel load_sensor_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sensor config " + path.string());
  return read_sensor_config(in);
}

void write_sensor_config(std::ostream& out, const SensorModel& model, const KeyValueMap& extra) {
  // identity keys first so the file reads naturally
  out << "name = " << model.name() << '\n';
  auto kv = to_key_values(model);
  out << "alpha_deg = " << kv["alpha_deg"] << '\n';
  out << "s1 = " << kv["s1"] << '\n';
  out << "s2 = " << kv["s2"] << '\n';
  for (const auto& [key, value] : extra) {
    if (kv.count(key)) continue;
    out << key << " = " << value << '\n';
  }
}

std::optional<SensorModel> builtin_sensor(const std::string& name) {
  const std::string key = lower(name);
  if (key == "lms151") return lms151_preset();
  if (key == "rs-lidar-16" || key == "rslidar16" || key == "rs_lidar16") return rs_lidar16_preset();
  if (key == "hdl-32e" || key == "hdl32e") return hdl32e_preset();
  return std::nullopt;
}

SensorModel resolve_sensor(const std::string& spec) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) return load_sensor_config(spec);
  if (auto builtin = builtin_sensor(spec)) return *builtin;
  throw ParseError("unknown sensor '" + spec + "' (neither a config file nor a preset name)");
}

}  // namespace lidar_bias
