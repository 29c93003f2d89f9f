#pragma once

#include <cmath>
#include <vector>

namespace hwctrl {

struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% confidence half-width
};

/// Two-sided 97.5% Student-t quantile (Cornish-Fisher expansion; exact to ~1e-4 for df >= 5).
double t_quantile_975(int df);

/// Confidence interval from independent (or batch) means.
Estimate mean_ci(const std::vector<double>& values);

/// Welford accumulator.
class RunningStats {
 public:
  void add(double v) {
    ++n_;
    double d = v - mean_;
    mean_ += d / n_;
    m2_ += d * (v - mean_);
  }
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / (n_ - 1) : 0.0; }
  double std_error() const { return n_ > 1 ? std::sqrt(variance() / n_) : 0.0; }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace hwctrl
