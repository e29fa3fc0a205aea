#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "constants.hpp"
#include "quenched/simd.hpp"

namespace quenched::simd {

using namespace detail;

double log_point(double x) {
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  double shift = 0.0;
  if (x < kMinNormal) {
    x = x * kTwo54;
    shift = -54.0;
  }
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const double biased = static_cast<double>(bits >> 52);
  double m = std::bit_cast<double>((bits & kMantissaMask) | kExponentOne);
  double k = (biased - 1023.0) + shift;
  if (m > kSqrt2) {
    m = m * 0.5;
    k = k + 1.0;
  }
  const double f = m - 1.0;
  const double s = f / (2.0 + f);
  const double z = s * s;
  const double w = z * z;
  const double t1 = w * (kLg2 + w * (kLg4 + w * kLg6));
  const double t2 = z * (kLg1 + w * (kLg3 + w * (kLg5 + w * kLg7)));
  const double r = t2 + t1;
  const double hfsq = 0.5 * f * f;
  return k * kLn2Hi - ((hfsq - (s * (hfsq + r) + k * kLn2Lo)) - f);
}

double exp_point(double y) {
  if (y < kExpLow) return 0.0;
  if (y > kExpHigh) return std::numeric_limits<double>::infinity();
  const double kd = std::nearbyint(y * kInvLn2);
  const double hi = y - kd * kLn2Hi;
  const double lo = kd * kLn2Lo;
  const double r = hi - lo;
  const double t = r * r;
  const double c = r - t * (kP1 + t * (kP2 + t * (kP3 + t * (kP4 + t * kP5))));
  const double ex = 1.0 - ((lo - (r * c) / (2.0 - c)) - hi);
  const auto biased = static_cast<std::uint64_t>(kd + 1023.0);
  return ex * std::bit_cast<double>(biased << 52);
}

double lsv_left_point(double alpha, double x) {
  const double p = exp_point(alpha * log_point(2.0 * x));
  return x * (1.0 + p);
}

namespace {

void exp_ref(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_point(in[i]);
}

void log_ref(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = log_point(in[i]);
}

void lsv_apply_ref(double alpha, const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    out[i] = x < 0.5 ? lsv_left_point(alpha, x) : 2.0 * x - 1.0;
  }
}

void lsv_left_ref(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = lsv_left_point(alpha, x[i]);
}

void doubling_apply_ref(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    out[i] = x < 0.5 ? 2.0 * x : 2.0 * x - 1.0;
  }
}

// Reductions keep four partial sums, lane l holding indices = l (mod 4),
// combined as (a0 + a1) + (a2 + a3); the remainder is added sequentially.
template <class Term>
double reduce4(std::size_t n, Term term) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int l = 0; l < 4; ++l) acc[l] = acc[l] + term(i + l);
  }
  double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) total = total + term(i);
  return total;
}

double sum_ref(const double* a, std::size_t n) {
  return reduce4(n, [a](std::size_t i) { return a[i]; });
}

double abs_sum_ref(const double* a, std::size_t n) {
  return reduce4(n, [a](std::size_t i) { return std::fabs(a[i]); });
}

double dot_ref(const double* a, const double* b, std::size_t n) {
  return reduce4(n, [a, b](std::size_t i) { return a[i] * b[i]; });
}

double abs_diff_sum_ref(const double* a, const double* b, std::size_t n) {
  return reduce4(n, [a, b](std::size_t i) { return std::fabs(a[i] - b[i]); });
}

double weighted_square_sum_ref(const double* v, const double* w, std::size_t n) {
  return reduce4(n, [v, w](std::size_t i) { return (v[i] * v[i]) * w[i]; });
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::scalar,      exp_ref,     log_ref, lsv_apply_ref,    lsv_left_ref,
      doubling_apply_ref, sum_ref, abs_sum_ref, dot_ref, abs_diff_sum_ref,
      weighted_square_sum_ref,
  };
  return table;
}

}  // namespace quenched::simd
