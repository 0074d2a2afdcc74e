#include "pex/test_function.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pex/stats.hpp"

namespace pex {

namespace {

constexpr double kPi = std::numbers::pi;

// 8-point Gauss-Legendre on [-1, 1]
constexpr double kGlX[8] = {-0.9602898564975363, -0.7966664774136267,
                            -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGlW[8] = {0.1012285362903763, 0.2223810344533745,
                            0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

}  // namespace

std::string to_string(BumpKind k) {
  switch (k) {
    case BumpKind::gaussian_bump: return "gaussian_bump";
    case BumpKind::cosine_bump: return "cosine_bump";
    case BumpKind::polynomial_bump: return "polynomial_bump";
    case BumpKind::constant: return "constant";
  }
  return "?";
}

BumpKind bump_kind_from_string(std::string_view s) {
  if (s == "gaussian_bump" || s == "gaussian" || s == "gauss")
    return BumpKind::gaussian_bump;
  if (s == "cosine_bump" || s == "cosine" || s == "cos")
    return BumpKind::cosine_bump;
  if (s == "polynomial_bump" || s == "polynomial" || s == "poly")
    return BumpKind::polynomial_bump;
  if (s == "constant" || s == "const") return BumpKind::constant;
  throw std::invalid_argument("unknown test function kind '" + std::string(s) +
                              "'");
}

double torus_delta(double a, double b) {
  double d = a - b;
  d -= std::floor(d + 0.5);
  return d;
}

TestFunction::TestFunction(BumpKind kind, std::vector<double> center,
                           double width, double amplitude, double radius)
    : kind_(kind),
      center_(std::move(center)),
      width_(width),
      amp_(amplitude),
      radius_(radius) {
  if (center_.empty()) throw std::invalid_argument("test function: d = 0");
  if (kind_ == BumpKind::constant) {
    radius_ = 1.0;
    return;
  }
  if (!(width_ > 0.0)) throw std::invalid_argument("test function: width <= 0");
  if (kind_ == BumpKind::gaussian_bump) {
    if (radius_ <= 0.0) radius_ = 8.0 * width_;
  } else {
    radius_ = width_;
  }
  if (radius_ >= 0.5)
    throw std::invalid_argument(
        "test function: support radius must be < 1/2 on the unit torus");
}

TestFunction TestFunction::constant(std::size_t d, double amplitude) {
  return TestFunction(BumpKind::constant, std::vector<double>(d, 0.0), 1.0,
                      amplitude);
}

double TestFunction::radial(double r2) const {
  switch (kind_) {
    case BumpKind::gaussian_bump:
      if (r2 >= radius_ * radius_) return 0.0;
      return amp_ * std::exp(-r2 / (2.0 * width_ * width_));
    case BumpKind::cosine_bump: {
      if (r2 >= width_ * width_) return 0.0;
      return amp_ * 0.5 * (1.0 + std::cos(kPi * std::sqrt(r2) / width_));
    }
    case BumpKind::polynomial_bump: {
      if (r2 >= width_ * width_) return 0.0;
      const double s = 1.0 - r2 / (width_ * width_);
      return amp_ * s * s * s;
    }
    case BumpKind::constant: return amp_;
  }
  return 0.0;
}

double TestFunction::operator()(const double* u) const {
  if (kind_ == BumpKind::constant) return amp_;
  double r2 = 0.0;
  for (std::size_t i = 0; i < center_.size(); ++i) {
    const double d = torus_delta(u[i], center_[i]);
    r2 += d * d;
  }
  return radial(r2);
}

double TestFunction::at(const double* u, const double* period) const {
  if (kind_ == BumpKind::constant) return amp_;
  double r2 = 0.0;
  for (std::size_t i = 0; i < center_.size(); ++i) {
    const double p = period[i];
    const double d = p * torus_delta(u[i] / p, center_[i] / p);
    r2 += d * d;
  }
  return radial(r2);
}

double TestFunction::integral() const {
  const double d = static_cast<double>(dim());
  const double w = width_;
  switch (kind_) {
    case BumpKind::gaussian_bump: {
      const double full = amp_ * std::pow(2.0 * kPi, d / 2.0) * std::pow(w, d);
      return full *
             boost::math::gamma_p(d / 2.0, radius_ * radius_ / (2.0 * w * w));
    }
    case BumpKind::cosine_bump:
      if (dim() == 1) return amp_ * w;
      if (dim() == 2) return amp_ * w * w * (kPi / 2.0 - 2.0 / kPi);
      break;
    case BumpKind::polynomial_bump:
      if (dim() == 1) return amp_ * w * 32.0 / 35.0;
      if (dim() == 2) return amp_ * kPi * w * w / 4.0;
      break;
    case BumpKind::constant: return amp_;
  }
  return integrate_against([](const double*) { return 1.0; }, 16);
}

double TestFunction::abs_integral() const {
  return amp_ == 0.0 ? 0.0 : std::fabs(integral());
}

double TestFunction::sup_norm() const { return std::fabs(amp_); }

double TestFunction::integrate_against(
    const std::function<double(const double*)>& f, int panels_per_width) const {
  const std::size_t d = dim();
  std::vector<double> lo(d);
  double span;
  int panels;
  if (kind_ == BumpKind::constant) {
    for (auto& v : lo) v = 0.0;
    span = 1.0;
    panels = 64;
  } else {
    for (std::size_t i = 0; i < d; ++i) lo[i] = center_[i] - radius_;
    span = 2.0 * radius_;
    panels = static_cast<int>(
        std::ceil(span / width_ * static_cast<double>(panels_per_width)));
  }
  const double h = span / panels;
  const int n1 = panels * 8;
  std::vector<double> nodes(n1), weights(n1);
  for (int p = 0; p < panels; ++p)
    for (int k = 0; k < 8; ++k) {
      nodes[p * 8 + k] = (p + 0.5) * h + 0.5 * h * kGlX[k];
      weights[p * 8 + k] = 0.5 * h * kGlW[k];
    }
  KahanSum acc;
  std::vector<int> idx(d, 0);
  std::vector<double> u(d);
  for (;;) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      double x = lo[i] + nodes[idx[i]];
      x -= std::floor(x);
      u[i] = x;
      w *= weights[idx[i]];
    }
    const double g = (*this)(u.data());
    if (g != 0.0) acc += w * g * f(u.data());
    std::size_t i = 0;
    while (i < d && ++idx[i] == n1) idx[i++] = 0;
    if (i == d) break;
  }
  return acc.value();
}

double periodized_gaussian(const Matrix& c, const double* u, double image_tol) {
  const std::size_t d = c.dim();
  const Matrix ci = inverse_spd(c);
  const double norm =
      1.0 / std::sqrt(std::pow(2.0 * kPi, static_cast<double>(d)) *
                      determinant_spd(c));
  std::vector<double> base(d), x(d);
  for (std::size_t i = 0; i < d; ++i) base[i] = torus_delta(u[i], 0.0);
  KahanSum total;
  for (int s = 0;; ++s) {
    KahanSum shell;
    std::vector<int> k(d, -s);
    for (;;) {
      int mx = 0;
      for (int v : k) mx = std::max(mx, std::abs(v));
      if (mx == s) {
        for (std::size_t i = 0; i < d; ++i) x[i] = base[i] + k[i];
        shell += norm * std::exp(-0.5 * quadratic_form(ci, x.data()));
      }
      std::size_t i = 0;
      while (i < d && ++k[i] > s) k[i++] = -s;
      if (i == d) break;
    }
    total += shell.value();
    if (s >= 1 && shell.value() < image_tol) break;
    if (s > 10000) break;
  }
  return total.value();
}

double TestFunction::heat_evolved(const Matrix& sigma, double t,
                                  const double* u) const {
  if (sigma.dim() != dim())
    throw std::invalid_argument("heat_evolved: Sigma dimension mismatch");
  if (t < 0.0) throw std::invalid_argument("heat_evolved: t < 0");
  if (kind_ == BumpKind::constant) return amp_;
  if (t == 0.0) return (*this)(u);
  const std::size_t d = dim();
  std::vector<double> du(d);
  if (kind_ == BumpKind::gaussian_bump) {
    // the truncation at radius R changes the answer by at most A exp(-R^2/2w^2)
    Matrix c = sigma * t + Matrix::identity(d, width_ * width_);
    for (std::size_t i = 0; i < d; ++i) du[i] = u[i] - center_[i];
    const double mass = amp_ * std::pow(2.0 * kPi, 0.5 * d) *
                        std::pow(width_, static_cast<double>(d));
    return mass * periodized_gaussian(c, du.data());
  }
  const Matrix c = sigma * t;
  return integrate_against([&](const double* v) {
    for (std::size_t i = 0; i < d; ++i) du[i] = u[i] - v[i];
    return periodized_gaussian(c, du.data());
  });
}

nlohmann::json TestFunction::to_json() const {
  return {{"kind", to_string(kind_)},
          {"center", center_},
          {"width", width_},
          {"amplitude", amp_},
          {"radius", radius_}};
}

TestFunction TestFunction::from_json(const nlohmann::json& j) {
  const auto kind = bump_kind_from_string(j.at("kind").get<std::string>());
  auto center = j.at("center").get<std::vector<double>>();
  if (kind == BumpKind::constant)
    return TestFunction::constant(center.size(), j.value("amplitude", 1.0));
  return TestFunction(kind, std::move(center), j.at("width").get<double>(),
                      j.value("amplitude", 1.0), j.value("radius", 0.0));
}

TestFunction TestFunction::parse(std::string_view text, std::size_t d) {
  const auto parts = split(text, ':');
  const BumpKind kind = bump_kind_from_string(parts[0]);
  if (kind == BumpKind::constant) {
    return TestFunction::constant(
        d, parts.size() > 1 ? to_double(parts[1]) : 1.0);
  }
  if (parts.size() < 3 || parts.size() > 4)
    throw std::invalid_argument("test function '" + std::string(text) +
                                "': expected kind:center:width[:amplitude]");
  std::vector<double> c;
  for (const auto& s : split(parts[1], ',')) c.push_back(to_double(s));
  if (c.size() == 1 && d > 1) c.assign(d, c[0]);
  if (c.size() != d)
    throw std::invalid_argument("test function '" + std::string(text) +
                                "': center has wrong dimension");
  const double amp = parts.size() == 4 ? to_double(parts[3]) : 1.0;
  return TestFunction(kind, c, to_double(parts[2]), amp);
}

std::string TestFunction::label() const {
  std::ostringstream os;
  os << to_string(kind_);
  if (kind_ != BumpKind::constant) {
    os << "@";
    for (std::size_t i = 0; i < center_.size(); ++i)
      os << (i ? "," : "") << center_[i];
    os << "/w=" << width_;
  }
  if (amp_ != 1.0) os << "*" << amp_;
  return os.str();
}

}  // namespace pex
