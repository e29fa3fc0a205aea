#pragma once

// Fiber maps f_omega on M = [0, 1] and the observables evaluated on them.
//
// LSV (Liverani-Saussol-Vaienti) map with exponent alpha:
//   f(x) = x (1 + (2x)^alpha)   on [0, 1/2)
//   f(x) = 2x - 1               on [1/2, 1]
// Doubling: f(x) = 2x on [0, 1/2), 2x - 1 on [1/2, 1].
// The branch point 1/2 belongs to the right branch for both families.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quenched/family.hpp"
#include "quenched/omega.hpp"

namespace quenched::maps {

struct FiberMap {
  Family family = Family::doubling;
  double alpha = 0.0;  // LSV exponent; unused by the doubling map
};

// Fiber map at index i of the sequence: f_{sigma^i omega}.
inline FiberMap fiber(const omega::ParamSequence& seq, std::int64_t i) {
  return FiberMap{seq.family(), seq.param(i)};
}

// Throws std::domain_error for x outside [0, 1].
double apply(const FiberMap& map, double x);

// Batch evaluation through the SIMD kernels; no domain checks.
void apply_batch(const FiberMap& map, std::span<const double> in, std::span<double> out);

// Left branch only (x in [0, 1/2)), no domain checks.
double left_branch(const FiberMap& map, double x);

// Inverse of the left branch: the unique x in [0, 1/2] with left_branch(x) = t,
// for t in [0, 1]. Safeguarded Newton iteration inside [t/2, t].
double left_branch_inverse(const FiberMap& map, double t);

// orbit(seq, x, n)[k] = f^k_omega(x) = f_{sigma^{k-1} omega} o ... o f_omega (x).
std::vector<double> orbit(const omega::ParamSequence& seq, double x, int n);

// f'(x). At the branch point the left-branch value is returned.
double derivative(const FiberMap& map, double x);

// Observables phi on M. Some observables depend on the fiber (coboundaries).
enum class ObservableKind {
  cos2pi,          // cos(2 pi x)
  holder,          // |x - 1/2|^gamma
  smooth_indicator,  // piecewise-linear ramp from 0 to 1 across [1/2 - w, 1/2 + w]
  coboundary_cos,  // u o f_omega - u with u = cos(2 pi x)
  constant,        // value c
  zero,
};

class Observable {
 public:
  static Observable cos2pi();
  static Observable holder(double gamma);
  static Observable smooth_indicator(double width);
  static Observable coboundary_cos();
  static Observable constant(double c);
  static Observable zero();

  // Registry lookup: cos2pi, holder_gamma, indicator_smooth, coboundary_cos,
  // constant, zero. `param` is gamma / ramp width / constant value.
  static Observable by_name(std::string_view name, double param);

  double operator()(double x, const FiberMap& fiber) const;

  ObservableKind kind() const { return kind_; }
  std::string name() const;
  double holder_exponent() const { return gamma_; }
  // |phi(x) - phi(y)| <= C |x - y|^gamma and |phi| <= C (for families with
  // alpha <= 1).
  double holder_constant() const { return constant_c_; }
  bool depends_on_fiber() const { return kind_ == ObservableKind::coboundary_cos; }

 private:
  Observable(ObservableKind kind, double gamma, double c, double param)
      : kind_(kind), gamma_(gamma), constant_c_(c), param_(param) {}

  ObservableKind kind_;
  double gamma_;
  double constant_c_;
  double param_;
};

}  // namespace quenched::maps
