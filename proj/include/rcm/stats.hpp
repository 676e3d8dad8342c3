#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "rcm/errors.hpp"

namespace rcm::stats {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw PreconditionError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw PreconditionError("variance needs at least two samples");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double standard_error(const std::vector<double>& x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Standard error of the sample variance, estimated from the fourth moment.
inline double variance_standard_error(const std::vector<double>& x) {
  const double m = mean(x);
  const double n = static_cast<double>(x.size());
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d2 = (v - m) * (v - m);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  return std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
}

/// |estimate - target| <= k * se.
inline bool within_se(double estimate, double target, double se, double k = 3.0) {
  return std::abs(estimate - target) <= k * se;
}

inline double normal_cdf(double x, double mu = 0.0, double sigma = 1.0) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic 1% critical value of the KS distance.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

/// KS distance for data supported on a grid of spacing h, with the CDF
/// evaluated half a spacing below and above each atom (continuity correction).
inline double ks_statistic_lattice(std::vector<double> x, const std::function<double(double)>& cdf, double h) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double below = cdf(x[i] - 0.5 * h), above = cdf(x[i] + 0.5 * h);
    d = std::max({d, std::abs(static_cast<double>(i) / n - below), std::abs(static_cast<double>(j) / n - above)});
    i = j;
  }
  return d;
}

/// Anderson-Darling statistic A^2 against a fully specified continuous CDF.
inline double anderson_darling(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = std::clamp(cdf(x[i]), 1e-300, 1.0 - 1e-16);
    const double fj = std::clamp(cdf(x[n - 1 - i]), 1e-300, 1.0 - 1e-16);
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(fi) + std::log1p(-fj));
  }
  return -nn - s / nn;
}

/// 1% critical value of A^2 for a fully specified distribution.
inline constexpr double kAndersonDarling1pct = 3.857;

/// Pearson chi-square statistic of observed counts against probabilities;
/// cells with zero probability must have zero count.
struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

inline ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& probs) {
  if (observed.size() != probs.size()) throw PreconditionError("chi-square size mismatch");
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  ChiSquare r;
  int cells = 0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (probs[k] <= 0.0) {
      if (observed[k] > 0.0) {
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
      }
      continue;
    }
    const double e = total * probs[k];
    r.statistic += (observed[k] - e) * (observed[k] - e) / e;
    ++cells;
  }
  r.dof = std::max(1, cells - 1);
  if (cells <= 1) return r;
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("linear fit needs >= 2 paired points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw PreconditionError("linear fit with constant abscissa");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

/// Slope of log y against log x.
inline LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  std::transform(x.begin(), x.end(), lx.begin(), [](double v) { return std::log(v); });
  std::transform(y.begin(), y.end(), ly.begin(), [](double v) { return std::log(v); });
  return linear_fit(lx, ly);
}

}  // namespace rcm::stats
