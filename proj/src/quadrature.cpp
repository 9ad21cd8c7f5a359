#include "lidar_bias/quadrature.hpp"

#include <cmath>

#include "lidar_bias/errors.hpp"

namespace lidar_bias {
namespace {

struct Panel {
  double lo, mid, hi;
  double f_lo, f_mid, f_hi;
  double whole;
};

double simpson(double lo, double hi, double f_lo, double f_mid, double f_hi) {
  return (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
}

struct Refiner {
  const std::function<double(double)>& f;
  int max_depth;
  int evaluations = 0;
  double error = 0.0;
  bool failed = false;

  double refine(const Panel& p, double tol, int depth) {
    const double lm = 0.5 * (p.lo + p.mid);
    const double rm = 0.5 * (p.mid + p.hi);
    const double f_lm = f(lm);
    const double f_rm = f(rm);
    evaluations += 2;
    const double left = simpson(p.lo, p.mid, p.f_lo, f_lm, p.f_mid);
    const double right = simpson(p.mid, p.hi, p.f_mid, f_rm, p.f_hi);
    const double diff = left + right - p.whole;
    if (std::abs(diff) <= 15.0 * tol) {
      error += std::abs(diff) / 15.0;
      return left + right + diff / 15.0;
    }
    if (depth >= max_depth) {
      failed = true;
      error += std::abs(diff) / 15.0;
      return left + right + diff / 15.0;
    }
    return refine({p.lo, lm, p.mid, p.f_lo, f_lm, p.f_mid, left}, 0.5 * tol, depth + 1) +
           refine({p.mid, rm, p.hi, p.f_mid, f_rm, p.f_hi, right}, 0.5 * tol, depth + 1);
  }
};

}  // namespace

QuadratureResult integrate_adaptive_simpson(const std::function<double(double)>& f, double lo,
                                            double hi, const QuadratureOptions& options) {
  if (!(hi > lo)) throw DomainError("integrate_adaptive_simpson: empty interval");
  if (options.initial_panels < 1) throw DomainError("integrate_adaptive_simpson: no panels");
  const int n = options.initial_panels;
  const double h = (hi - lo) / n;
  const double panel_tol = options.abs_tolerance / n;

  Refiner refiner{f, options.max_depth};
  double total = 0.0;
  double x0 = lo;
  double f0 = f(lo);
  refiner.evaluations = 1;
  for (int i = 0; i < n; ++i) {
    const double x2 = (i + 1 == n) ? hi : lo + h * (i + 1);
    const double x1 = 0.5 * (x0 + x2);
    const double f1 = f(x1);
    const double f2 = f(x2);
    refiner.evaluations += 2;
    const Panel p{x0, x1, x2, f0, f1, f2, simpson(x0, x2, f0, f1, f2)};
    total += refiner.refine(p, panel_tol, 0);
    x0 = x2;
    f0 = f2;
  }
  if (refiner.failed || !std::isfinite(total)) {
    throw NumericError("adaptive Simpson did not converge", total, refiner.error);
  }
  return {total, refiner.error, refiner.evaluations};
}

double integrate_composite_simpson(const std::function<double(double)>& f, double lo, double hi,
                                   int panels) {
  if (panels < 1) throw DomainError("integrate_composite_simpson: no panels");
  const double h = (hi - lo) / panels;
  double sum = f(lo) + f(hi);
  for (int i = 0; i < panels; ++i) {
    const double x0 = lo + h * i;
    sum += 4.0 * f(x0 + 0.5 * h);
    if (i > 0) sum += 2.0 * f(x0);
  }
  return sum * h / 6.0;
}

}  // namespace lidar_bias
