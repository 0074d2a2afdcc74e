#include "pex/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <stdexcept>

namespace pex {

void KahanSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

double compensated_sum(std::span<const double> xs) noexcept {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

void RunningStats::push(double x) noexcept {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) noexcept {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double d = o.mean_ - mean_;
  mean_ += d * nb / n;
  m2_ += o.m2_ + d * d * na * nb / n;
  n_ += o.n_;
}

double RunningStats::variance() const noexcept {
  return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}
double RunningStats::stddev() const noexcept { return std::sqrt(variance()); }
double RunningStats::stderr_mean() const noexcept {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

void RunningCov::push(double x, double y) noexcept {
  ++n_;
  const double dx = x - mx_;
  mx_ += dx / static_cast<double>(n_);
  my_ += (y - my_) / static_cast<double>(n_);
  cxy_ += dx * (y - my_);
}

double RunningCov::covariance() const noexcept {
  return n_ > 1 ? cxy_ / static_cast<double>(n_ - 1) : 0.0;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = compensated_sum(x) / n, my = compensated_sum(y) / n;
  KahanSum sxx, sxy, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx.value() <= 0.0)
    throw std::invalid_argument("linear_fit: abscissae are all equal");
  LinearFit f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  f.r2 = syy.value() > 0.0
             ? sxy.value() * sxy.value() / (sxx.value() * syy.value())
             : 1.0;
  return f;
}

double chi_square_sf(double x, int dof) {
  if (dof <= 0) return 1.0;
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, x));
}

ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b,
                                      std::uint64_t min_pooled) {
  if (a.size() != b.size())
    throw std::invalid_argument("chi_square_two_sample: bin count mismatch");
  std::vector<double> ca, cb;
  double ra = 0, rb = 0;
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]);
    if (a[i] + b[i] >= min_pooled) {
      ca.push_back(static_cast<double>(a[i]));
      cb.push_back(static_cast<double>(b[i]));
    } else {
      ra += static_cast<double>(a[i]);
      rb += static_cast<double>(b[i]);
    }
  }
  if (ra + rb > 0) {
    ca.push_back(ra);
    cb.push_back(rb);
  }
  ChiSquareResult r;
  if (na == 0 || nb == 0 || ca.size() < 2) return r;
  const double k1 = std::sqrt(nb / na), k2 = std::sqrt(na / nb);
  KahanSum s;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double tot = ca[i] + cb[i];
    if (tot <= 0) continue;
    const double d = k1 * ca[i] - k2 * cb[i];
    s += d * d / tot;
  }
  r.statistic = s.value();
  r.dof = static_cast<int>(ca.size()) - 1;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

}  // namespace pex
