#include "talksplat/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace talksplat::gradcheck {

double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({1e-6, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

Result central_diff_check(const GradProgram& program, std::vector<double> x,
                          double step) {
  auto [loss0, grad] = program(x);
  (void)loss0;
  Result r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = program(x).first;
    x[i] = keep - step;
    const double dn = program(x).first;
    x[i] = keep;
    const double fd = (up - dn) / (2.0 * step);
    const double re = rel_err(grad[i], fd);
    const double ae = std::fabs(grad[i] - fd);
    if (re > r.max_rel_err) {
      r.max_rel_err = re;
      r.worst_index = i;
      r.analytic_at_worst = grad[i];
      r.numeric_at_worst = fd;
    }
    r.max_abs_err = std::max(r.max_abs_err, ae);
  }
  return r;
}

}  // namespace talksplat::gradcheck

// run_suite lives at the end of the build: it needs every module's probes.
// Its definition is appended in this file once those modules exist (see the
// suite section below, filled in by the module implementations' probes).
