#pragma once

#include <functional>

namespace lidar_bias {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
};

struct QuadratureOptions {
  double abs_tolerance = 1e-12;
  int initial_panels = 16;
  int max_depth = 40;
};

/// Adaptive composite Simpson rule on [lo, hi].
///
/// The interval is first split into `initial_panels` equal panels; each panel
/// is then bisected until the doubled-resolution estimate agrees with the
/// coarse one to within its share of the tolerance (Richardson criterion
/// |S2 - S1| <= 15 tol). Throws NumericError when a panel still disagrees at
/// `max_depth`, reporting the estimate and the accumulated error bound.
QuadratureResult integrate_adaptive_simpson(const std::function<double(double)>& f, double lo,
                                            double hi, const QuadratureOptions& options = {});

/// Fixed composite Simpson rule with `panels` panels (2 * panels + 1 nodes).
double integrate_composite_simpson(const std::function<double(double)>& f, double lo, double hi,
                                   int panels);

}  // namespace lidar_bias
