// AVX2 variants of the reference kernels in scalar.cpp. Each function mirrors
// the reference operation by operation (no FMA contraction) so results agree
// bit for bit; remainders fall back to the reference point functions.

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "constants.hpp"
#include "quenched/simd.hpp"

namespace quenched::simd {

using namespace detail;

namespace {

inline __m256d splat(double v) { return _mm256_set1_pd(v); }

// Exact conversion of a non-negative integer below 2^52 held in 64-bit lanes.
inline __m256d small_u64_to_double(__m256i v) {
  const __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(v, magic)), splat(kTwo52));
}

inline __m256d log4(__m256d x) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d is_zero = _mm256_cmp_pd(x, zero, _CMP_EQ_OQ);
  const __m256d tiny = _mm256_cmp_pd(x, splat(kMinNormal), _CMP_LT_OQ);
  x = _mm256_blendv_pd(x, _mm256_mul_pd(x, splat(kTwo54)), tiny);
  const __m256d shift = _mm256_and_pd(tiny, splat(-54.0));

  const __m256i bits = _mm256_castpd_si256(x);
  const __m256d biased = small_u64_to_double(_mm256_srli_epi64(bits, 52));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(static_cast<long long>(kMantissaMask))),
                      _mm256_set1_epi64x(static_cast<long long>(kExponentOne))));
  __m256d k = _mm256_add_pd(_mm256_sub_pd(biased, splat(1023.0)), shift);
  const __m256d big = _mm256_cmp_pd(m, splat(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, splat(0.5)), big);
  k = _mm256_blendv_pd(k, _mm256_add_pd(k, splat(1.0)), big);

  const __m256d f = _mm256_sub_pd(m, splat(1.0));
  const __m256d s = _mm256_div_pd(f, _mm256_add_pd(splat(2.0), f));
  const __m256d z = _mm256_mul_pd(s, s);
  const __m256d w = _mm256_mul_pd(z, z);
  const __m256d t1 = _mm256_mul_pd(
      w, _mm256_add_pd(splat(kLg2),
                       _mm256_mul_pd(w, _mm256_add_pd(splat(kLg4), _mm256_mul_pd(w, splat(kLg6))))));
  const __m256d t2 = _mm256_mul_pd(
      z, _mm256_add_pd(
             splat(kLg1),
             _mm256_mul_pd(
                 w, _mm256_add_pd(splat(kLg3),
                                  _mm256_mul_pd(w, _mm256_add_pd(splat(kLg5),
                                                                 _mm256_mul_pd(w, splat(kLg7))))))));
  const __m256d r = _mm256_add_pd(t2, t1);
  const __m256d hfsq = _mm256_mul_pd(_mm256_mul_pd(splat(0.5), f), f);
  const __m256d inner = _mm256_add_pd(_mm256_mul_pd(s, _mm256_add_pd(hfsq, r)),
                                      _mm256_mul_pd(k, splat(kLn2Lo)));
  const __m256d result = _mm256_sub_pd(_mm256_mul_pd(k, splat(kLn2Hi)),
                                       _mm256_sub_pd(_mm256_sub_pd(hfsq, inner), f));
  return _mm256_blendv_pd(result, splat(-std::numeric_limits<double>::infinity()), is_zero);
}

inline __m256d exp4(__m256d y) {
  const __m256d low = _mm256_cmp_pd(y, splat(kExpLow), _CMP_LT_OQ);
  const __m256d high = _mm256_cmp_pd(y, splat(kExpHigh), _CMP_GT_OQ);
  const __m256d yc = _mm256_min_pd(_mm256_max_pd(y, splat(kExpLow)), splat(kExpHigh));

  const __m256d kd =
      _mm256_round_pd(_mm256_mul_pd(yc, splat(kInvLn2)), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d hi = _mm256_sub_pd(yc, _mm256_mul_pd(kd, splat(kLn2Hi)));
  const __m256d lo = _mm256_mul_pd(kd, splat(kLn2Lo));
  const __m256d r = _mm256_sub_pd(hi, lo);
  const __m256d t = _mm256_mul_pd(r, r);
  __m256d poly = _mm256_add_pd(splat(kP4), _mm256_mul_pd(t, splat(kP5)));
  poly = _mm256_add_pd(splat(kP3), _mm256_mul_pd(t, poly));
  poly = _mm256_add_pd(splat(kP2), _mm256_mul_pd(t, poly));
  poly = _mm256_add_pd(splat(kP1), _mm256_mul_pd(t, poly));
  const __m256d c = _mm256_sub_pd(r, _mm256_mul_pd(t, poly));
  const __m256d frac = _mm256_div_pd(_mm256_mul_pd(r, c), _mm256_sub_pd(splat(2.0), c));
  const __m256d ex = _mm256_sub_pd(splat(1.0), _mm256_sub_pd(_mm256_sub_pd(lo, frac), hi));

  // kd + 1023 lies in [2, 2046]; adding 2^52 exposes it in the low mantissa bits.
  const __m256i biased =
      _mm256_castpd_si256(_mm256_add_pd(_mm256_add_pd(kd, splat(1023.0)), splat(kTwo52)));
  const __m256i scale_bits =
      _mm256_slli_epi64(_mm256_and_si256(biased, _mm256_set1_epi64x(0x7ff)), 52);
  __m256d result = _mm256_mul_pd(ex, _mm256_castsi256_pd(scale_bits));
  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), low);
  return _mm256_blendv_pd(result, splat(std::numeric_limits<double>::infinity()), high);
}

inline __m256d lsv_left4(__m256d alpha, __m256d x) {
  const __m256d p = exp4(_mm256_mul_pd(alpha, log4(_mm256_mul_pd(splat(2.0), x))));
  return _mm256_mul_pd(x, _mm256_add_pd(splat(1.0), p));
}

void exp_avx2(const double* in, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(in + i)));
  for (; i < n; ++i) out[i] = exp_point(in[i]);
}

void log_avx2(const double* in, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, log4(_mm256_loadu_pd(in + i)));
  for (; i < n; ++i) out[i] = log_point(in[i]);
}

void lsv_apply_avx2(double alpha, const double* in, double* out, std::size_t n) {
  const __m256d a = splat(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(in + i);
    const __m256d left = _mm256_cmp_pd(x, splat(0.5), _CMP_LT_OQ);
    const __m256d right_val = _mm256_sub_pd(_mm256_mul_pd(splat(2.0), x), splat(1.0));
    // Right-branch lanes still run through log/exp on a harmless argument.
    const __m256d xl = _mm256_blendv_pd(splat(0.25), x, left);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(right_val, lsv_left4(a, xl), left));
  }
  for (; i < n; ++i) {
    const double x = in[i];
    out[i] = x < 0.5 ? lsv_left_point(alpha, x) : 2.0 * x - 1.0;
  }
}

void lsv_left_avx2(double alpha, double* x, std::size_t n) {
  const __m256d a = splat(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, lsv_left4(a, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] = lsv_left_point(alpha, x[i]);
}

void doubling_apply_avx2(const double* in, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(in + i);
    const __m256d twice = _mm256_mul_pd(splat(2.0), x);
    const __m256d left = _mm256_cmp_pd(x, splat(0.5), _CMP_LT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_sub_pd(twice, splat(1.0)), twice, left));
  }
  for (; i < n; ++i) {
    const double x = in[i];
    out[i] = x < 0.5 ? 2.0 * x : 2.0 * x - 1.0;
  }
}

inline double horizontal(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline __m256d abs4(__m256d v) { return _mm256_andnot_pd(splat(-0.0), v); }

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double total = horizontal(acc);
  for (; i < n; ++i) total = total + a[i];
  return total;
}

double abs_sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, abs4(_mm256_loadu_pd(a + i)));
  double total = horizontal(acc);
  for (; i < n; ++i) total = total + std::fabs(a[i]);
  return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double total = horizontal(acc);
  for (; i < n; ++i) total = total + a[i] * b[i];
  return total;
}

double abs_diff_sum_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, abs4(_mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))));
  double total = horizontal(acc);
  for (; i < n; ++i) {
    total = total + std::fabs(a[i] - b[i]);
  }
  return total;
}

double weighted_square_sum_avx2(const double* v, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(x, x), _mm256_loadu_pd(w + i)));
  }
  double total = horizontal(acc);
  for (; i < n; ++i) total = total + (v[i] * v[i]) * w[i];
  return total;
}

}  // namespace

namespace detail {

const KernelTable& avx2_table() {
  static const KernelTable table{
      Isa::avx2,           exp_avx2,       log_avx2,    lsv_apply_avx2,
      lsv_left_avx2,       doubling_apply_avx2, sum_avx2, abs_sum_avx2,
      dot_avx2,            abs_diff_sum_avx2,   weighted_square_sum_avx2,
  };
  return table;
}

}  // namespace detail
}  // namespace quenched::simd
