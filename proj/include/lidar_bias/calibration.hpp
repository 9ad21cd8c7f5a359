#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lidar_bias/closed_form.hpp"

namespace lidar_bias {

/// Offsets of the calibration rig: interferometer-to-LIDAR (delta_z),
/// lateral LIDAR offset (delta_x) and board-to-rotation-centre (delta_c).
struct SetupGeometry {
  double delta_z = 0.0;
  double delta_x = 0.0;
  double delta_c = 0.0;

  void validate() const;
};

struct MeasurementRecord {
  std::string sensor;
  double depth = 0.0;          ///< LIDAR reading d [m]
  double incidence_deg = 0.0;  ///< signed board angle
  double interferometer = 0.0; ///< reference distance D [m]
  std::optional<double> error; ///< e [m] when already computed
  double dispersion = 0.0;     ///< std-dev over the acquisition window [m]

  void validate() const;
};

/// Distance the LIDAR should report for reference distance D at angle theta.
double corrected_distance(double interferometer, double theta, const SetupGeometry& g);

/// e = d - D_c; negative when the LIDAR under-ranges.
double measurement_error(const MeasurementRecord& rec, const SetupGeometry& g);

/// delta_z as the mean of (d - D) over the records at theta = 0.
double estimate_delta_z(const std::vector<MeasurementRecord>& records);

struct AveragedMeasurement {
  double depth;
  double incidence_deg;  ///< |theta|
  double error;          ///< mean over the +theta and -theta sides
  double dispersion;
  bool paired;           ///< both signs present (theta = 0 counts as paired)
};

inline constexpr double kPairingToleranceDeg = 0.25;

/// Groups records by depth and |theta| (within kPairingToleranceDeg) and
/// averages the errors of the two signs. Records must carry `error`.
std::vector<AveragedMeasurement> symmetric_average(const std::vector<MeasurementRecord>& records);

/// Same, computing each record's error from the setup geometry when absent.
std::vector<AveragedMeasurement> symmetric_average(const std::vector<MeasurementRecord>& records,
                                                   const SetupGeometry& g);

/// One (d, theta, e) calibration point, SI units.
struct CalibrationSample {
  double depth;
  double incidence;
  double error;
};

std::vector<CalibrationSample> to_samples(const std::vector<AveragedMeasurement>& averaged);

enum class LossKind { kSquared, kHuber };

struct RobustLoss {
  LossKind kind = LossKind::kHuber;
  double tuning = 1.345;  ///< Huber threshold in units of the robust scale
  int max_iterations = 500;
  double tolerance = 1e-10;  ///< relative parameter change

  static RobustLoss squared() { return {LossKind::kSquared, 0.0, 1, 0.0}; }
  static RobustLoss huber(double k = 1.345) { return {LossKind::kHuber, k, 500, 1e-10}; }
};

struct FitResult {
  double s1 = 0.0;
  double s2 = 0.0;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  double scale = 0.0;            ///< final robust residual scale (Huber only)
  Eigen::VectorXd weights;       ///< final per-point IRLS weights

  SensorModel to_model(std::string name, double half_aperture) const {
    return {std::move(name), half_aperture, s1, s2};
  }
};

/// Columns [delta_d, delta_shape] of the linear model at each sample.
Eigen::MatrixX2d bias_design_matrix(const std::vector<CalibrationSample>& data,
                                    double half_aperture, const PulseParams& pulse,
                                    double wavelength = kDefaultWavelength);

/// Fits e ~ s1 delta_d + s2 delta_shape. Huber loss runs IRLS with the
/// threshold tuning * 1.4826 * MAD(residuals), re-estimated every iteration.
FitResult fit_scale_factors(const std::vector<CalibrationSample>& data, double half_aperture,
                            const PulseParams& pulse, const RobustLoss& loss = {},
                            double wavelength = kDefaultWavelength);

/// Same fit on a precomputed design matrix.
FitResult fit_linear_robust(const Eigen::MatrixX2d& design, const Eigen::VectorXd& target,
                            const RobustLoss& loss = {});

/// Empirical baseline c + b d + a exp(k theta) (theta in radians).
struct PfisterModel {
  double c0 = 0.0;
  double b = 0.0;
  double a = 0.0;
  double k = 0.0;

  double operator()(double d, double theta) const;
};

struct PfisterFit {
  PfisterModel model;
  double residual_rms = 0.0;
};

struct PfisterSearch {
  double k_min = -40.0;
  double k_max = 40.0;
  int grid_points = 801;
};

/// Least squares with k found by a bracketed 1-D search and (c, b, a) solved
/// linearly for each k. When the exponential term does not lower the residual
/// the simpler model is returned (a = 0, k = 0; b = 0 too if it is also idle).
PfisterFit fit_pfister(const std::vector<CalibrationSample>& data, const PfisterSearch& search = {});

double residual_rms(const std::vector<CalibrationSample>& data, const PfisterModel& m);
double residual_rms(const std::vector<CalibrationSample>& data, const SensorModel& m,
                    const PulseParams& pulse);

struct IsocurveGrid {
  std::vector<double> depths;          ///< [m]
  std::vector<double> incidences_deg;  ///< [deg]
  Eigen::MatrixXd error;               ///< rows: depth, cols: incidence
};

IsocurveGrid isocurve_grid(const SensorModel& model, const PulseParams& pulse, double d_min,
                           double d_max, double theta_min_deg, double theta_max_deg,
                           std::size_t n_depth, std::size_t n_incidence);

/// CSV `d_m,theta_deg,error_m`, depth-major.
void write_isocurve_csv(std::ostream& out, const IsocurveGrid& grid);

/// Twelve incidences and eight depths of the reference bench protocol.
std::vector<double> bench_incidences_deg();
std::vector<double> bench_depths();

// --- CSV ingestion (header sensor,d_m,theta_deg,error_m,dispersion_m) -----------

std::vector<MeasurementRecord> read_measurement_csv(std::istream& in);
std::vector<MeasurementRecord> load_measurement_csv(const std::filesystem::path& path);
void write_measurement_csv(std::ostream& out, const std::vector<MeasurementRecord>& records);

}  // namespace lidar_bias
