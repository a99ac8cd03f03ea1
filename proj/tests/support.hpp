#ifndef FEWATOM_TESTS_SUPPORT_HPP
#define FEWATOM_TESTS_SUPPORT_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace testsupport {

// Upper 0.1% points of the chi-square distribution, df = 1..30
// (scipy.stats.chi2.ppf(0.999, df)).
inline constexpr std::array<double, 31> kChi2Crit999{
    0.0,     10.8276, 13.8155, 16.2662, 18.4668, 20.5150, 22.4577, 24.3219, 26.1245,
    27.8772, 29.5883, 31.2641, 32.9095, 34.5282, 36.1233, 37.6973, 39.2524, 40.7902,
    42.3124, 43.8202, 45.3147, 46.7970, 48.2679, 49.7282, 51.1786, 52.6197, 54.0520,
    55.4760, 56.8923, 58.3012, 59.7031};

struct Chi2 {
  double statistic = 0.0;
  int df = 0;
  double critical() const { return kChi2Crit999.at(static_cast<std::size_t>(df)); }
};

/// Pearson statistic after pooling neighbouring cells until each expects at
/// least 5 counts; the last cell should already carry the tail mass.
inline Chi2 pearson(const std::vector<double>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw std::invalid_argument("size mismatch");
  std::vector<double> o, e;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_o += observed[i];
    acc_e += expected[i];
    if (acc_e >= 5.0) {
      o.push_back(acc_o);
      e.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (e.empty()) throw std::invalid_argument("too few expected counts");
    o.back() += acc_o;
    e.back() += acc_e;
  }
  Chi2 out;
  for (std::size_t i = 0; i < o.size(); ++i) out.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  out.df = static_cast<int>(o.size()) - 1;
  return out;
}

inline double poisson_pmf(int k, double mean) {
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

/// Expected counts of a Poisson sample of size n on cells 0..kmax, the last
/// cell holding the upper tail.
inline std::vector<double> poisson_expected(double mean, int kmax, double n) {
  std::vector<double> e(static_cast<std::size_t>(kmax) + 1);
  double cdf = 0.0;
  for (int k = 0; k < kmax; ++k) {
    const double p = poisson_pmf(k, mean);
    e[static_cast<std::size_t>(k)] = n * p;
    cdf += p;
  }
  e.back() = n * (1.0 - cdf);
  return e;
}

} // namespace testsupport

#endif
