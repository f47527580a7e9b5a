#pragma once

// Finite-difference gradient verification. Used by the unit tests, the
// acceptance suite and the `check-grad` CLI subcommand.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace talksplat::gradcheck {

// A differentiable scalar program: given a flat input vector, evaluates the
// loss and returns the analytic gradient with respect to that vector
// (typically by building a fresh tape and calling backward).
using GradProgram =
    std::function<std::pair<double, std::vector<double>>(
        const std::vector<double>&)>;

struct Result {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// rel err with a floor so near-zero gradients compare in absolute terms:
// |a - f| / max(1e-6, |a|, |f|).
double rel_err(double analytic, double numeric);

// Central differences, step h per coordinate (f(x+h)-f(x-h))/(2h).
Result central_diff_check(const GradProgram& program, std::vector<double> x,
                          double step = 1e-5);

// Named probe registered into the full suite.
struct SuiteCase {
  std::string name;
  double tolerance = 1e-4;
  Result result;
  int seeds = 0;
  bool pass = false;
};

// Runs the whole-op gradient suite (autodiff kernels, rigging chain,
// rasterizer, losses, color model, sequence model) across `seeds` randomized
// instances per probe. Populated in gradcheck.cpp as modules register.
std::vector<SuiteCase> run_suite(std::uint64_t seed, int seeds_per_case);

}  // namespace talksplat::gradcheck
