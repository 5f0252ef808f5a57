#include "csm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "csm/domain.hpp"

namespace csm {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double student_t_two_sided(double t, double df) {
  if (!(df > 0)) throw Error(Errc::invalid_argument, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(Errc::invalid_argument, "t-test needs two values per sample");
  auto moments = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  const double se2 = qa + qb;
  if (!(se2 > 0)) throw Error(Errc::invalid_argument, "t-test undefined for two constant samples");

  TTestResult r;
  r.mean_a = ma;
  r.mean_b = mb;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1));
  r.p = std::clamp(student_t_two_sided(r.t, r.df), 0.0, 1.0);
  return r;
}

namespace {

// Midranks of the pooled sample and the tie group sizes.
std::vector<double> midranks(const std::vector<double>& pooled, std::vector<std::size_t>& ties) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    ties.push_back(j - i + 1);
    i = j + 1;
  }
  return ranks;
}

// Null distribution of U: counts[u] over all C(n1+n2, n1) arrangements.
std::vector<double> u_counts(std::size_t n1, std::size_t n2) {
  // f[i][j][u]: arrangements of i values of x and j of y with statistic u.
  const std::size_t umax = n1 * n2;
  std::vector<std::vector<std::vector<double>>> f(
      n1 + 1, std::vector<std::vector<double>>(n2 + 1, std::vector<double>(umax + 1, 0.0)));
  for (std::size_t i = 0; i <= n1; ++i) {
    for (std::size_t j = 0; j <= n2; ++j) {
      if (i == 0 || j == 0) {
        f[i][j][0] = 1.0;
        continue;
      }
      // The largest value is either an x (beating all j y's) or a y.
      for (std::size_t u = 0; u <= i * j; ++u) {
        double v = f[i][j - 1][u];
        if (u >= j) v += f[i - 1][j][u - j];
        f[i][j][u] = v;
      }
    }
  }
  return f[n1][n2];
}

}  // namespace

UTestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, UMethod method) {
  if (x.empty() || y.empty()) throw Error(Errc::invalid_argument, "U test needs non-empty samples");
  for (double v : x) {
    if (std::isnan(v)) throw Error(Errc::invalid_argument, "NaN in U test sample");
  }
  for (double v : y) {
    if (std::isnan(v)) throw Error(Errc::invalid_argument, "NaN in U test sample");
  }
  const std::size_t n1 = x.size();
  const std::size_t n2 = y.size();
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<std::size_t> ties;
  const std::vector<double> ranks = midranks(pooled, ties);
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(n1), 0.0);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double u1 = r1 - dn1 * (dn1 + 1) / 2;
  const double u2 = dn1 * dn2 - u1;
  const double u = std::max(u1, u2);
  const bool tied = std::any_of(ties.begin(), ties.end(), [](std::size_t t) { return t > 1; });

  if (method == UMethod::kAuto) method = (n1 > 8 && n2 > 8) || tied ? UMethod::kAsymptotic : UMethod::kExact;

  UTestResult r;
  r.u = u1;
  if (method == UMethod::kExact) {
    if (n1 * n2 > 40000) throw Error(Errc::invalid_argument, "samples too large for the exact U distribution");
    const std::vector<double> counts = u_counts(n1, n2);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto from = static_cast<std::size_t>(u);
    double tail = 0.0;
    for (std::size_t k = from; k < counts.size(); ++k) tail += counts[k];
    r.exact = true;
    r.p = std::min(1.0, 2.0 * tail / total);
    return r;
  }
  const double n = dn1 + dn2;
  double tie_term = 0.0;
  for (std::size_t t : ties) {
    const double dt = static_cast<double>(t);
    tie_term += dt * dt * dt - dt;
  }
  const double var = dn1 * dn2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (!(var > 0)) {
    r.p = 1.0;  // every value tied
    return r;
  }
  const double s = std::sqrt(var);
  r.z = (u - dn1 * dn2 / 2 - 0.5) / s;
  r.p = std::clamp(2.0 * normal_sf(r.z), 0.0, 1.0);
  return r;
}

}  // namespace csm
