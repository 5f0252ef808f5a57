#pragma once

// Two-sample tests used by the period comparison.

#include <span>

namespace csm {

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 1;  // two-sided
  double mean_a = 0;
  double mean_b = 0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom. Needs at least two values per sample and a non-zero pooled
// standard error.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Two-sided tail of Student's t distribution: P(|T| >= |t|).
double student_t_two_sided(double t, double df);
// Upper tail of the standard normal distribution.
double normal_sf(double z);

enum class UMethod {
  kAuto,        // exact when either sample has at most 8 values and there are no ties
  kExact,
  kAsymptotic,  // normal approximation with tie and continuity correction
};

struct UTestResult {
  double u = 0;  // U statistic of the first sample
  double p = 1;  // two-sided
  bool exact = false;
  double z = 0;  // standardised statistic (asymptotic method only)
};

UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, UMethod method = UMethod::kAuto);

}  // namespace csm
