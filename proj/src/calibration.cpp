#include "lidar_bias/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "lidar_bias/sensor_config.hpp"

namespace lidar_bias {
namespace {

constexpr double kMadToSigma = 1.482602218505602;

double median(std::vector<double> v) {
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double robust_scale(const Eigen::VectorXd& r) {
  std::vector<double> v(r.data(), r.data() + r.size());
  const double m = median(v);
  for (auto& x : v) x = std::abs(x - m);
  return kMadToSigma * median(std::move(v));
}

double rms(const Eigen::VectorXd& r) {
  return r.size() == 0 ? 0.0 : std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

void check_rank(const Eigen::MatrixXd& design) {
  Eigen::MatrixXd scaled = design;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double n = scaled.col(j).norm();
    if (!(n > 0.0)) throw FitError("degenerate fit: a regressor column is identically zero");
    scaled.col(j) /= n;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < 1e-10 * sv(0))
    throw FitError("degenerate fit: regressor columns are collinear");
}

Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd xw = sw.asDiagonal() * x;
  const Eigen::VectorXd yw = sw.cwiseProduct(y);
  return xw.colPivHouseholderQr().solve(yw);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, int line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void SetupGeometry::validate() const {
  if (!std::isfinite(delta_z) || !std::isfinite(delta_x) || !std::isfinite(delta_c))
    throw DomainError("setup geometry offsets must be finite");
  if (delta_c < 0.0) throw DomainError("delta_c must be non-negative");
}

void MeasurementRecord::validate() const {
  if (!(depth > 0.0)) throw DomainError("measurement depth must be positive");
  if (!(std::abs(incidence_deg) <= 89.0)) throw DomainError("|incidence| must not exceed 89 deg");
  if (!(dispersion >= 0.0)) throw DomainError("dispersion must be non-negative");
}

double corrected_distance(double interferometer, double theta, const SetupGeometry& g) {
  if (!(std::abs(theta) < std::numbers::pi / 2))
    throw DomainError("corrected_distance: |theta| must be below pi/2");
  return interferometer - g.delta_z + g.delta_c / std::cos(theta) - g.delta_x * std::tan(theta);
}

double measurement_error(const MeasurementRecord& rec, const SetupGeometry& g) {
  return rec.depth - corrected_distance(rec.interferometer, deg_to_rad(rec.incidence_deg), g);
}

double estimate_delta_z(const std::vector<MeasurementRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.incidence_deg != 0.0) continue;
    sum += r.depth - r.interferometer;
    ++n;
  }
  if (n == 0) throw PreconditionError("estimate_delta_z: no records at 0 deg");
  return sum / static_cast<double>(n);
}

std::vector<AveragedMeasurement> symmetric_average(const std::vector<MeasurementRecord>& records) {
  for (const auto& r : records) {
    r.validate();
    if (!r.error) throw PreconditionError("symmetric_average: record without error value");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = records[a];
    const auto& rb = records[b];
    if (ra.depth != rb.depth) return ra.depth < rb.depth;
    return std::abs(ra.incidence_deg) < std::abs(rb.incidence_deg);
  });

  std::vector<AveragedMeasurement> out;
  std::size_t i = 0;
  while (i < order.size()) {
    const auto& first = records[order[i]];
    const double abs0 = std::abs(first.incidence_deg);
    std::size_t j = i;
    double pos_sum = 0.0, neg_sum = 0.0, zero_sum = 0.0, abs_sum = 0.0, var_sum = 0.0;
    std::size_t pos_n = 0, neg_n = 0, zero_n = 0;
    while (j < order.size()) {
      const auto& r = records[order[j]];
      if (std::abs(r.depth - first.depth) > 1e-9 * std::max(1.0, first.depth)) break;
      if (std::abs(std::abs(r.incidence_deg) - abs0) > kPairingToleranceDeg) break;
      if (r.incidence_deg > 0.0) {
        pos_sum += *r.error;
        ++pos_n;
      } else if (r.incidence_deg < 0.0) {
        neg_sum += *r.error;
        ++neg_n;
      } else {
        zero_sum += *r.error;
        ++zero_n;
      }
      abs_sum += std::abs(r.incidence_deg);
      var_sum += r.dispersion * r.dispersion;
      ++j;
    }
    const auto n = static_cast<double>(j - i);
    AveragedMeasurement m{};
    m.depth = first.depth;
    m.incidence_deg = abs_sum / n;
    m.dispersion = std::sqrt(var_sum) / n;
    if (pos_n > 0 && neg_n > 0) {
      m.error = 0.5 * (pos_sum / pos_n + neg_sum / neg_n);
      m.paired = true;
    } else {
      m.error = (pos_sum + neg_sum + zero_sum) / n;
      // normal incidence is its own mirror image
      m.paired = zero_n > 0 && pos_n == 0 && neg_n == 0;
    }
    out.push_back(m);
    i = j;
  }
  return out;
}

std::vector<AveragedMeasurement> symmetric_average(const std::vector<MeasurementRecord>& records,
                                                   const SetupGeometry& g) {
  g.validate();
  std::vector<MeasurementRecord> filled = records;
  for (auto& r : filled)
    if (!r.error) r.error = measurement_error(r, g);
  return symmetric_average(filled);
}

std::vector<CalibrationSample> to_samples(const std::vector<AveragedMeasurement>& averaged) {
  std::vector<CalibrationSample> out;
  out.reserve(averaged.size());
  for (const auto& a : averaged) out.push_back({a.depth, deg_to_rad(a.incidence_deg), a.error});
  return out;
}

Eigen::MatrixX2d bias_design_matrix(const std::vector<CalibrationSample>& data,
                                    double half_aperture, const PulseParams& pulse,
                                    double wavelength) {
  const BeamGeometry beam(wavelength, half_aperture);
  Eigen::MatrixX2d x(static_cast<Eigen::Index>(data.size()), 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = delta_distance(s.depth, s.incidence, pulse, beam);
    x(row, 1) = delta_shape(s.depth, s.incidence, pulse, beam);
  }
  return x;
}

FitResult fit_linear_robust(const Eigen::MatrixX2d& design, const Eigen::VectorXd& target,
                            const RobustLoss& loss) {
  if (design.rows() != target.size()) throw PreconditionError("design/target size mismatch");
  if (!design.allFinite() || !target.allFinite())
    throw PreconditionError("fit input contains non-finite values");
  check_rank(design);

  const Eigen::MatrixXd x = design;
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(target.size());
  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(target);

  FitResult out;
  out.iterations = 1;
  out.converged = true;
  if (loss.kind == LossKind::kHuber) {
    out.converged = false;
    const double y_scale = std::max(target.cwiseAbs().maxCoeff(), 1e-300);
    for (int it = 1; it <= loss.max_iterations; ++it) {
      out.iterations = it;
      const Eigen::VectorXd r = target - x * beta;
      const double scale = robust_scale(r);
      out.scale = scale;
      if (scale <= 1e-14 * y_scale) {
        // residuals at round-off level: the current solution is exact
        out.converged = true;
        break;
      }
      const double threshold = loss.tuning * scale;
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double ar = std::abs(r(i));
        weights(i) = ar <= threshold ? 1.0 : threshold / ar;
      }
      const Eigen::VectorXd next = weighted_solve(x, target, weights);
      const double change =
          ((next - beta).array().abs() / next.array().abs().max(1e-300)).maxCoeff();
      beta = next;
      if (change < loss.tolerance) {
        out.converged = true;
        break;
      }
    }
  }
  out.s1 = beta(0);
  out.s2 = beta(1);
  out.weights = weights;
  out.residual_rms = rms(target - x * beta);
  return out;
}

FitResult fit_scale_factors(const std::vector<CalibrationSample>& data, double half_aperture,
                            const PulseParams& pulse, const RobustLoss& loss, double wavelength) {
  const auto informative = std::count_if(data.begin(), data.end(),
                                         [](const CalibrationSample& s) { return s.incidence > 0.0; });
  if (informative < 2)
    throw PreconditionError("fit_scale_factors needs at least two samples with theta > 0");
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data[i].error;
  return fit_linear_robust(bias_design_matrix(data, half_aperture, pulse, wavelength), y, loss);
}

// --- empirical baseline --------------------------------------------------------

double PfisterModel::operator()(double d, double theta) const {
  return c0 + b * d + a * std::exp(k * theta);
}

namespace {

struct LinearPfister {
  Eigen::Vector3d coeffs;
  double rms;
};

LinearPfister solve_pfister_linear(const std::vector<CalibrationSample>& data, double k,
                                   int columns) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd x(n, columns);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    if (columns > 1) x(i, 1) = s.depth;
    if (columns > 2) x(i, 2) = std::exp(k * s.incidence);
    y(i) = s.error;
  }
  const Eigen::VectorXd sol = x.colPivHouseholderQr().solve(y);
  LinearPfister out{Eigen::Vector3d::Zero(), rms(y - x * sol)};
  out.coeffs.head(columns) = sol;
  return out;
}

}  // namespace

PfisterFit fit_pfister(const std::vector<CalibrationSample>& data, const PfisterSearch& search) {
  if (data.size() < 4) throw PreconditionError("fit_pfister needs at least four points");
  std::set<double> depths, angles;
  for (const auto& s : data) {
    depths.insert(s.depth);
    angles.insert(s.incidence);
  }
  if (depths.size() < 2 || angles.size() < 2)
    throw PreconditionError("fit_pfister needs at least two depths and two angles");
  if (search.grid_points < 3 || !(search.k_max > search.k_min))
    throw PreconditionError("fit_pfister: bad search bracket");

  auto cost = [&](double k) { return solve_pfister_linear(data, k, 3).rms; };
  const double step = (search.k_max - search.k_min) / (search.grid_points - 1);
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < search.grid_points; ++i) {
    const double c = cost(search.k_min + step * i);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }

  const auto constant = solve_pfister_linear(data, 0.0, 1);
  const auto linear = solve_pfister_linear(data, 0.0, 2);
  auto no_gain = [&](double simpler) { return simpler <= best_cost * (1.0 + 1e-9) + 1e-15; };
  if (no_gain(constant.rms)) return {{constant.coeffs(0), 0.0, 0.0, 0.0}, constant.rms};
  if (no_gain(linear.rms)) return {{linear.coeffs(0), linear.coeffs(1), 0.0, 0.0}, linear.rms};

  if (best == 0 || best == search.grid_points - 1)
    throw FitError("fit_pfister: exponent search hit the bracket boundary");

  // golden-section refinement inside the neighbouring grid cells
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = search.k_min + step * (best - 1);
  double hi = search.k_min + step * (best + 1);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = cost(x1);
  double f2 = cost(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = cost(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = cost(x2);
    }
  }
  const double k = 0.5 * (lo + hi);
  const auto full = solve_pfister_linear(data, k, 3);
  return {{full.coeffs(0), full.coeffs(1), full.coeffs(2), k}, full.rms};
}

double residual_rms(const std::vector<CalibrationSample>& data, const PfisterModel& m) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    r(static_cast<Eigen::Index>(i)) = data[i].error - m(data[i].depth, data[i].incidence);
  return rms(r);
}

double residual_rms(const std::vector<CalibrationSample>& data, const SensorModel& m,
                    const PulseParams& pulse) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    r(static_cast<Eigen::Index>(i)) =
        data[i].error - bias_error(data[i].depth, data[i].incidence, m, pulse);
  return rms(r);
}

// --- isocurves ---------------------------------------------------------------

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw PreconditionError("grid resolution must be positive");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

IsocurveGrid isocurve_grid(const SensorModel& model, const PulseParams& pulse, double d_min,
                           double d_max, double theta_min_deg, double theta_max_deg,
                           std::size_t n_depth, std::size_t n_incidence) {
  const ValidityDomain dom;
  if (!(d_min >= dom.depth_min) || !(d_max <= dom.depth_max) || !(d_min <= d_max))
    throw DomainError("isocurve depth range outside the validity domain");
  if (!(theta_min_deg >= 0.0) || !(deg_to_rad(theta_max_deg) <= dom.incidence_max + 1e-12) ||
      !(theta_min_deg <= theta_max_deg))
    throw DomainError("isocurve incidence range outside the validity domain");
  IsocurveGrid g;
  g.depths = linspace(d_min, d_max, n_depth);
  g.incidences_deg = linspace(theta_min_deg, theta_max_deg, n_incidence);
  g.error.resize(static_cast<Eigen::Index>(n_depth), static_cast<Eigen::Index>(n_incidence));
  BiasOptions strict;
  strict.policy = DomainPolicy::kStrict;
  strict.domain.incidence_max = std::max(dom.incidence_max, deg_to_rad(theta_max_deg));
  for (std::size_t i = 0; i < n_depth; ++i)
    for (std::size_t j = 0; j < n_incidence; ++j)
      g.error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          evaluate_bias(g.depths[i], deg_to_rad(g.incidences_deg[j]), model, pulse, strict).value;
  return g;
}

void write_isocurve_csv(std::ostream& out, const IsocurveGrid& grid) {
  out << "d_m,theta_deg,error_m\n";
  for (std::size_t i = 0; i < grid.depths.size(); ++i)
    for (std::size_t j = 0; j < grid.incidences_deg.size(); ++j)
      out << format_double(grid.depths[i]) << ',' << format_double(grid.incidences_deg[j]) << ','
          << format_double(grid.error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << '\n';
}

std::vector<double> bench_incidences_deg() {
  return {0, 10, 20, 30, 40, 50, 60, 65, 70, 75, 80, 85};
}

std::vector<double> bench_depths() { return {1, 2, 2.5, 3, 4, 5, 7, 10}; }

// --- CSV -----------------------------------------------------------------------

std::vector<MeasurementRecord> read_measurement_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  const auto header = split_csv(line);
  const std::vector<std::string> expected{"sensor", "d_m", "theta_deg", "error_m", "dispersion_m"};
  if (header != expected)
    throw ParseError("measurement CSV header must be sensor,d_m,theta_deg,error_m,dispersion_m");
  std::vector<MeasurementRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5)
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields");
    MeasurementRecord r;
    r.sensor = f[0];
    r.depth = to_double(f[1], line_no);
    r.incidence_deg = to_double(f[2], line_no);
    if (!f[3].empty()) r.error = to_double(f[3], line_no);
    r.dispersion = f[4].empty() ? 0.0 : to_double(f[4], line_no);
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MeasurementRecord> load_measurement_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_measurement_csv(in);
}

void write_measurement_csv(std::ostream& out, const std::vector<MeasurementRecord>& records) {
  out << "sensor,d_m,theta_deg,error_m,dispersion_m\n";
  for (const auto& r : records) {
    out << r.sensor << ',' << format_double(r.depth) << ',' << format_double(r.incidence_deg) << ','
        << (r.error ? format_double(*r.error) : std::string()) << ','
        << format_double(r.dispersion) << '\n';
  }
}

}  // namespace lidar_bias
