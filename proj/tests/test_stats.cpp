#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "csm/domain.hpp"
#include "csm/stats.hpp"

using namespace csm;

// Reference values computed once with scipy 1.15.3 (stats.ttest_ind with
// equal_var=False, stats.t.sf, stats.norm.sf, stats.mannwhitneyu) and frozen.

namespace {
constexpr double kRel = 1e-9;
}

TEST_CASE("Welch t-test against scipy") {
  const std::vector<double> a{4.1, 5.3, 6.2, 5.9, 4.8, 5.5, 6.7};
  const std::vector<double> b{6.9, 7.4, 5.8, 8.1, 7.7, 6.6, 8.4, 7.2, 9.0};
  const TTestResult r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-4.22105352700393).epsilon(kRel));
  CHECK(r.df == doctest::Approx(13.64785488402765).epsilon(kRel));
  CHECK(r.p == doctest::Approx(0.0009018150923145134).epsilon(kRel));
  CHECK(r.mean_a == doctest::Approx(38.5 / 7.0));
  CHECK(r.mean_b == doctest::Approx(67.1 / 9.0));

  const std::vector<double> a2{0, 1, 0, 1, 1, 0, 1, 1, 0, 1};
  const std::vector<double> b2{0, 0, 0, 1, 0, 0, 1};
  const TTestResult r2 = welch_t_test(a2, b2);
  CHECK(r2.t == doctest::Approx(1.2758537104946475).epsilon(kRel));
  CHECK(r2.df == doctest::Approx(13.545420153443397).epsilon(kRel));
  CHECK(r2.p == doctest::Approx(0.22345223843121165).epsilon(kRel));

  // Swapping the samples flips the sign only.
  const TTestResult swapped = welch_t_test(b, a);
  CHECK(swapped.t == doctest::Approx(-r.t).epsilon(1e-12));
  CHECK(swapped.p == doctest::Approx(r.p).epsilon(1e-12));

  const std::vector<double> one{1.0};
  const std::vector<double> flat{2.0, 2.0, 2.0};
  CHECK_THROWS_AS(welch_t_test(one, b), Error);
  CHECK_THROWS_AS(welch_t_test(flat, flat), Error);
}

TEST_CASE("distribution tails against scipy") {
  CHECK(student_t_two_sided(2.0, 5) == doctest::Approx(0.10193947882985828).epsilon(kRel));
  CHECK(student_t_two_sided(0.5, 3.3) == doctest::Approx(0.6485350763995585).epsilon(kRel));
  CHECK(student_t_two_sided(4.2, 40.7) == doctest::Approx(0.0001415865852597446).epsilon(kRel));
  CHECK(student_t_two_sided(-10.0, 2) == doctest::Approx(0.009852457023325692).epsilon(kRel));
  CHECK(normal_sf(0.0) == 0.5);
  CHECK(normal_sf(1.0) == doctest::Approx(0.15865525393145707).epsilon(kRel));
  CHECK(normal_sf(1.96) == doctest::Approx(0.024997895148220435).epsilon(kRel));
  CHECK(normal_sf(3.5) == doctest::Approx(0.00023262907903552502).epsilon(kRel));
  CHECK(normal_sf(-1.2) == doctest::Approx(0.8849303297782918).epsilon(kRel));
}

TEST_CASE("Mann-Whitney U against scipy") {
  SUBCASE("small samples use the exact distribution") {
    const std::vector<double> x{1.1, 3.2, 5.3};
    const std::vector<double> y{2.4, 4.5, 6.6, 7.7};
    const UTestResult r = mann_whitney_u(x, y);
    CHECK(r.exact);
    CHECK(r.u == 3.0);
    CHECK(r.p == doctest::Approx(0.4).epsilon(kRel));
  }
  SUBCASE("ties force the normal approximation") {
    const std::vector<double> x{1, 2, 2, 3, 3, 3, 4, 5, 5, 6};
    const std::vector<double> y{3, 4, 4, 5, 6, 6, 7, 7, 8, 9, 9};
    const UTestResult r = mann_whitney_u(x, y);
    CHECK_FALSE(r.exact);
    CHECK(r.u == 15.5);
    CHECK(r.p == doctest::Approx(0.005625214779700691).epsilon(kRel));
  }
  SUBCASE("larger samples") {
    std::vector<double> x, y;
    for (int v = 1; v <= 20; ++v) x.push_back(v);
    for (int v = 1; v <= 12; ++v) y.push_back(v + 7.5);
    const UTestResult aut = mann_whitney_u(x, y);
    CHECK_FALSE(aut.exact);
    CHECK(aut.u == 78.0);
    CHECK(aut.p == doctest::Approx(0.10622727963720886).epsilon(kRel));
    const UTestResult ex = mann_whitney_u(x, y, UMethod::kExact);
    CHECK(ex.exact);
    CHECK(ex.p == doctest::Approx(0.10696822804478652).epsilon(kRel));
    CHECK(mann_whitney_u(x, y, UMethod::kAsymptotic).p == aut.p);
  }
  const std::vector<double> none;
  const std::vector<double> some{1.0, 2.0};
  CHECK_THROWS_AS(mann_whitney_u(none, some), Error);
}

TEST_CASE("U equals a brute-force pair count") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(1, 25), value(0, 12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(len(rng)), y(len(rng));
    for (auto& v : x) v = value(rng);
    for (auto& v : y) v = value(rng);
    double pairs = 0.0;
    for (double a : x) {
      for (double b : y) pairs += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
    const UTestResult r = mann_whitney_u(x, y);
    CHECK(r.u == pairs);
    CHECK(r.p >= 0.0);
    CHECK(r.p <= 1.0);
    // U of the other sample is the complement.
    CHECK(mann_whitney_u(y, x).u == doctest::Approx(static_cast<double>(x.size() * y.size()) - pairs));
    CHECK(mann_whitney_u(y, x).p == doctest::Approx(r.p).epsilon(1e-12));
  }
}
