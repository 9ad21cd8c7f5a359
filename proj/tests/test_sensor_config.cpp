#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lidar_bias/errors.hpp"
#include "lidar_bias/sensor_config.hpp"

using namespace lidar_bias;

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  std::istringstream in("# header\n\n name = LMS151 \nalpha_deg=0.43 # trailing\ns1 = 6.08\n");
  const auto kv = parse_key_values(in);
  EXPECT_EQ(kv.at("name"), "LMS151");
  EXPECT_EQ(kv.at("alpha_deg"), "0.43");
  EXPECT_EQ(kv.at("s1"), "6.08");
  EXPECT_EQ(kv.size(), 3u);
}

TEST(KeyValues, RejectsMalformedLines) {
  std::istringstream no_eq("name LMS151\n");
  EXPECT_THROW(parse_key_values(no_eq), ParseError);
  std::istringstream dup("a = 1\na = 2\n");
  EXPECT_THROW(parse_key_values(dup), ParseError);
  std::istringstream empty_key(" = 2\n");
  EXPECT_THROW(parse_key_values(empty_key), ParseError);
}

TEST(SensorConfig, RoundTripsPresetsExactly) {
  for (const auto& m : {lms151_preset(), rs_lidar16_preset(), hdl32e_preset()}) {
    std::stringstream buf;
    write_sensor_config(buf, m);
    const auto back = read_sensor_config(buf);
    EXPECT_EQ(back.name(), m.name());
    EXPECT_EQ(back.half_aperture(), m.half_aperture());
    EXPECT_EQ(back.s1(), m.s1());
    EXPECT_EQ(back.s2(), m.s2());
  }
}

TEST(SensorConfig, IgnoresExtraKeysAndRejectsMissing) {
  std::istringstream extra("name = X\nalpha_deg = 0.1\ns1 = 2\ns2 = 0.5\nresidual_rms_m = 0.001\n");
  const auto m = read_sensor_config(extra);
  EXPECT_DOUBLE_EQ(m.s1(), 2.0);
  std::istringstream missing("name = X\nalpha_deg = 0.1\ns1 = 2\n");
  EXPECT_THROW(read_sensor_config(missing), ParseError);
  std::istringstream bad("name = X\nalpha_deg = abc\ns1 = 2\ns2 = 1\n");
  EXPECT_THROW(read_sensor_config(bad), ParseError);
  std::istringstream negative("name = X\nalpha_deg = -0.1\ns1 = 2\ns2 = 1\n");
  EXPECT_THROW(read_sensor_config(negative), DomainError);
}

TEST(SensorConfig, WritesExtraKeys) {
  std::stringstream buf;
  write_sensor_config(buf, lms151_preset(), {{"residual_rms_m", "0.002"}});
  const auto kv = parse_key_values(buf);
  EXPECT_EQ(kv.at("residual_rms_m"), "0.002");
  EXPECT_EQ(kv.at("name"), "LMS151");
}

TEST(SensorConfig, ResolvesBuiltinsAndFiles) {
  EXPECT_EQ(builtin_sensor("lms151")->name(), "LMS151");
  EXPECT_EQ(builtin_sensor("RS-LiDAR-16")->s1(), 84.85);
  EXPECT_EQ(builtin_sensor("hdl-32e")->s2(), 7.08e-3);
  EXPECT_FALSE(builtin_sensor("velodyne").has_value());

  lidar_bias::testing::TempDir dir("cfg");
  const auto path = dir / "custom.cfg";
  {
    std::ofstream out(path);
    write_sensor_config(out, SensorModel("custom", 0.002, 1.5, 0.25));
  }
  EXPECT_EQ(resolve_sensor(path.string()).name(), "custom");
  EXPECT_EQ(resolve_sensor("hdl-32e").name(), hdl32e_preset().name());
  EXPECT_THROW(resolve_sensor((dir / "missing.cfg").string()), ParseError);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 6.08, 3.18e-3, 1.0 / 3.0, -2.5e-300, 123456789.125}) {
    const auto s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_double(0.43), "0.43");
}

TEST(SensorConfig, ShippedPresetFilesMatchBuiltins) {
  const std::filesystem::path dir(LIDAR_BIAS_PRESET_DIR);
  for (const char* name : {"lms151", "rs-lidar-16", "hdl-32e"}) {
    const auto file = load_sensor_config(dir / (std::string(name) + ".cfg"));
    const auto builtin = *builtin_sensor(name);
    EXPECT_EQ(file.name(), builtin.name());
    EXPECT_EQ(file.half_aperture(), builtin.half_aperture());
    EXPECT_EQ(file.s1(), builtin.s1());
    EXPECT_EQ(file.s2(), builtin.s2());
  }
}
