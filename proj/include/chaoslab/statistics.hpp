#ifndef CHAOSLAB_STATISTICS_HPP
#define CHAOSLAB_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "chaoslab/error.hpp"

namespace chaoslab {

/// Mergeable first and second moments of a real sample.
struct Moments {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void push(double x) {
    count += 1.0;
    sum += x;
    sum_sq += x * x;
  }

  Moments& operator+=(const Moments& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }

  double mean() const { return count > 0 ? sum / count : 0.0; }

  double variance() const {
    if (count < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - count * m * m) / (count - 1.0));
  }

  /// Standard error of the mean.
  double std_error() const { return count > 0 ? std::sqrt(variance() / count) : 0.0; }
};

/// Mean of a complex sample; the standard error is that of the modulus,
/// sqrt((var Re + var Im) / count).
struct ComplexMoments {
  Moments re;
  Moments im;

  void push(std::complex<double> x) {
    re.push(x.real());
    im.push(x.imag());
  }

  ComplexMoments& operator+=(const ComplexMoments& o) {
    re += o.re;
    im += o.im;
    return *this;
  }

  std::complex<double> mean() const { return {re.mean(), im.mean()}; }
  double count() const { return re.count; }

  double std_error() const {
    if (re.count <= 0) return 0.0;
    return std::sqrt((re.variance() + im.variance()) / re.count);
  }
};

/// Cross moments for a sample correlation.
struct Covariation {
  Moments x;
  Moments y;
  double sum_xy = 0.0;

  void push(double a, double b) {
    x.push(a);
    y.push(b);
    sum_xy += a * b;
  }

  Covariation& operator+=(const Covariation& o) {
    x += o.x;
    y += o.y;
    sum_xy += o.sum_xy;
    return *this;
  }

  double correlation() const {
    const double n = x.count;
    if (n < 2) return 0.0;
    const double cov = (sum_xy - n * x.mean() * y.mean()) / (n - 1.0);
    const double sx = std::sqrt(x.variance()), sy = std::sqrt(y.variance());
    return sx > 0 && sy > 0 ? cov / (sx * sy) : 0.0;
  }
};

namespace detail {

// Neumaier summation.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and N(0,1).
inline double ks_statistic_normal(std::vector<double> xs) {
  detail::require(!xs.empty(), "KS statistic of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Least-squares slope of log(y) against log(x).
inline double fitted_decay_exponent(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "decay fit needs at least two points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::require(x[i] > 0 && y[i] > 0, "decay fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_STATISTICS_HPP
