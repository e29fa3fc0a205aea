#include "quenched/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "quenched/simd.hpp"

namespace quenched::maps {

namespace {

double apply_unchecked(const FiberMap& map, double x) {
  if (x >= 0.5) return 2.0 * x - 1.0;
  return map.family == Family::lsv ? simd::lsv_left_point(map.alpha, x) : 2.0 * x;
}

}  // namespace

double apply(const FiberMap& map, double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("fiber map argument outside [0, 1]: " + std::to_string(x));
  return apply_unchecked(map, x);
}

void apply_batch(const FiberMap& map, std::span<const double> in, std::span<double> out) {
  if (map.family == Family::lsv)
    simd::lsv_apply(map.alpha, in, out);
  else
    simd::doubling_apply(in, out);
}

double left_branch(const FiberMap& map, double x) {
  return map.family == Family::lsv ? simd::lsv_left_point(map.alpha, x) : 2.0 * x;
}

double left_branch_inverse(const FiberMap& map, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("left_branch_inverse: target outside [0, 1]");
  if (map.family == Family::doubling) return 0.5 * t;
  if (t == 0.0) return 0.0;
  if (t == 1.0) return 0.5;

  // x (1 + (2x)^alpha) lies between x and 2x on [0, 1/2].
  double lo = 0.5 * t;
  double hi = std::min(t, 0.5);
  double x = t / (1.0 + std::pow(t, map.alpha));
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double value = left_branch(map, x) - t;
    if (value == 0.0) return x;
    if (value > 0.0)
      hi = x;
    else
      lo = x;
    const double slope = 1.0 + (1.0 + map.alpha) * std::pow(2.0 * x, map.alpha);
    double next = x - value / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) return next;
    x = next;
  }
  return x;
}

std::vector<double> orbit(const omega::ParamSequence& seq, double x, int n) {
  if (n < 0) throw std::invalid_argument("orbit length must be non-negative");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(x);
  for (int k = 0; k < n; ++k) out.push_back(apply(fiber(seq, k), out.back()));
  return out;
}

double derivative(const FiberMap& map, double x) {
  if (map.family == Family::doubling) return 2.0;
  if (x > 0.5) return 2.0;
  return 1.0 + (1.0 + map.alpha) * std::pow(2.0 * x, map.alpha);
}

Observable Observable::cos2pi() { return {ObservableKind::cos2pi, 1.0, 2.0 * std::numbers::pi, 0.0}; }

Observable Observable::holder(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("holder exponent must lie in (0, 1]");
  return {ObservableKind::holder, gamma, 1.0, gamma};
}

Observable Observable::smooth_indicator(double width) {
  if (!(width > 0.0 && width <= 0.5)) throw std::invalid_argument("ramp width must lie in (0, 1/2]");
  return {ObservableKind::smooth_indicator, 1.0, std::max(1.0, 0.5 / width), width};
}

Observable Observable::coboundary_cos() {
  // Lipschitz constant 2 pi (sup f' + 1) with sup f' <= 3 for alpha <= 1.
  return {ObservableKind::coboundary_cos, 1.0, 8.0 * std::numbers::pi, 0.0};
}

Observable Observable::constant(double c) { return {ObservableKind::constant, 1.0, std::fabs(c), c}; }

Observable Observable::zero() { return {ObservableKind::zero, 1.0, 0.0, 0.0}; }

Observable Observable::by_name(std::string_view name, double param) {
  if (name == "cos2pi") return cos2pi();
  if (name == "holder_gamma") return holder(param);
  if (name == "indicator_smooth") return smooth_indicator(param);
  if (name == "coboundary_cos") return coboundary_cos();
  if (name == "constant") return constant(param);
  if (name == "zero") return zero();
  throw std::invalid_argument("unknown observable '" + std::string(name) + "'");
}

std::string Observable::name() const {
  switch (kind_) {
    case ObservableKind::cos2pi:
      return "cos2pi";
    case ObservableKind::holder:
      return "holder_gamma";
    case ObservableKind::smooth_indicator:
      return "indicator_smooth";
    case ObservableKind::coboundary_cos:
      return "coboundary_cos";
    case ObservableKind::constant:
      return "constant";
    case ObservableKind::zero:
      return "zero";
  }
  return "unknown";
}

double Observable::operator()(double x, const FiberMap& fiber) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (kind_) {
    case ObservableKind::cos2pi:
      return std::cos(two_pi * x);
    case ObservableKind::holder:
      return std::pow(std::fabs(x - 0.5), param_);
    case ObservableKind::smooth_indicator:
      return std::clamp((x - (0.5 - param_)) / (2.0 * param_), 0.0, 1.0);
    case ObservableKind::coboundary_cos:
      return std::cos(two_pi * apply_unchecked(fiber, x)) - std::cos(two_pi * x);
    case ObservableKind::constant:
      return param_;
    case ObservableKind::zero:
      return 0.0;
  }
  return 0.0;
}

}  // namespace quenched::maps
