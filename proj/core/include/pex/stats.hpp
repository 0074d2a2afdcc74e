#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pex {

/// Compensated (Neumaier) summation.
class KahanSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + comp_; }
  KahanSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs) noexcept;

/// Streaming mean / variance (Welford), mergeable with Chan's update.
class RunningStats {
 public:
  void push(double x) noexcept;
  void merge(const RunningStats& o) noexcept;
  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const noexcept;
  double stddev() const noexcept;
  /// Standard error of the mean.
  double stderr_mean() const noexcept;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Streaming covariance of a pair.
class RunningCov {
 public:
  void push(double x, double y) noexcept;
  std::uint64_t count() const noexcept { return n_; }
  double mean_x() const noexcept { return mx_; }
  double mean_y() const noexcept { return my_; }
  double covariance() const noexcept;

 private:
  std::uint64_t n_ = 0;
  double mx_ = 0.0, my_ = 0.0, cxy_ = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = a + b x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test on histograms over the same bins.
/// Bins whose pooled count is below min_pooled are merged into one bin.
ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b,
                                      std::uint64_t min_pooled = 10);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, int dof);

}  // namespace pex
