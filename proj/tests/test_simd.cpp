#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <vector>

#include "quenched/rng.hpp"
#include "quenched/simd.hpp"

using namespace quenched;

namespace {

std::vector<double> unit_inputs(std::size_t n, std::uint64_t seed) {
  std::vector<double> v(n);
  SplitMix64 rng(seed);
  for (auto& x : v) x = rng.uniform();
  // Edge values up front: exact zero, subnormal, tiny, branch point, endpoints.
  const double edges[] = {0.0, 4.9e-324, 1e-300, 1e-17, 0.5, std::nextafter(0.5, 0.0), 1.0, 0.25, 0.75};
  for (std::size_t i = 0; i < std::size(edges) && i < n; ++i) v[i] = edges[i];
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

double ulp_distance(double a, double b) {
  if (a == b) return 0.0;
  return std::fabs(a - b) / std::fabs(std::nextafter(b, std::numeric_limits<double>::infinity()) - b);
}

}  // namespace

TEST_CASE("selected kernel table honours QUENCHED_SIMD") {
  const char* forced = std::getenv("QUENCHED_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
    CHECK(simd::active_isa() == simd::Isa::scalar);
  } else if (simd::avx2_kernels() != nullptr) {
    CHECK(simd::active_isa() == simd::Isa::avx2);
  }
  MESSAGE("active kernels: " << simd::isa_name(simd::active_isa()));
}

TEST_CASE("reference exp and log stay within one ulp of libm") {
  SplitMix64 rng(3);
  double worst_exp = 0.0;
  double worst_log = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double y = -700.0 + 1400.0 * rng.uniform();
    worst_exp = std::max(worst_exp, ulp_distance(simd::exp_point(y), std::exp(y)));
    const double x = std::ldexp(0.5 + rng.uniform(), static_cast<int>(rng() % 2000) - 1000);
    worst_log = std::max(worst_log, ulp_distance(simd::log_point(x), std::log(x)));
  }
  CHECK(worst_exp <= 1.0);
  CHECK(worst_log <= 1.0);
  CHECK(simd::log_point(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(simd::log_point(1.0) == 0.0);
  CHECK(simd::exp_point(0.0) == 1.0);
  CHECK(simd::exp_point(-800.0) == 0.0);
  CHECK(std::fabs(simd::log_point(5e-324) - std::log(5e-324)) < 1e-12);
}

TEST_CASE("AVX2 kernels are bit-identical to the reference kernels") {
  const simd::KernelTable* vec = simd::avx2_kernels();
  if (vec == nullptr) {
    MESSAGE("AVX2 kernels unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const simd::KernelTable& ref = simd::scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 64u, 1001u, 65536u}) {
    CAPTURE(n);
    const auto x = unit_inputs(n, 17 + n);
    std::vector<double> a(n), b(n);

    ref.lsv_apply(0.1, x.data(), a.data(), n);
    vec->lsv_apply(0.1, x.data(), b.data(), n);
    CHECK(same_bits(a, b));

    ref.doubling_apply(x.data(), a.data(), n);
    vec->doubling_apply(x.data(), b.data(), n);
    CHECK(same_bits(a, b));

    std::vector<double> left_a(x), left_b(x);
    for (auto* v : {&left_a, &left_b})
      for (auto& t : *v) t *= 0.5;
    ref.lsv_left(0.37, left_a.data(), n);
    vec->lsv_left(0.37, left_b.data(), n);
    CHECK(same_bits(left_a, left_b));

    std::vector<double> args(n);
    SplitMix64 rng(n);
    for (auto& t : args) t = -720.0 + 1440.0 * rng.uniform();
    ref.exp(args.data(), a.data(), n);
    vec->exp(args.data(), b.data(), n);
    CHECK(same_bits(a, b));

    ref.log(x.data(), a.data(), n);
    vec->log(x.data(), b.data(), n);
    CHECK(same_bits(a, b));

    std::vector<double> w(n);
    for (auto& t : w) t = rng.uniform() - 0.5;
    auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
    CHECK(bits(ref.sum(w.data(), n)) == bits(vec->sum(w.data(), n)));
    CHECK(bits(ref.abs_sum(w.data(), n)) == bits(vec->abs_sum(w.data(), n)));
    CHECK(bits(ref.dot(w.data(), x.data(), n)) == bits(vec->dot(w.data(), x.data(), n)));
    CHECK(bits(ref.abs_diff_sum(w.data(), x.data(), n)) == bits(vec->abs_diff_sum(w.data(), x.data(), n)));
    CHECK(bits(ref.weighted_square_sum(w.data(), x.data(), n)) ==
          bits(vec->weighted_square_sum(w.data(), x.data(), n)));
  }
}

TEST_CASE("batch LSV map agrees with the single-point reference") {
  const auto x = unit_inputs(4099, 5);
  std::vector<double> out(x.size());
  simd::lsv_apply(0.2, x, out);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = x[i] < 0.5 ? simd::lsv_left_point(0.2, x[i]) : 2.0 * x[i] - 1.0;
    REQUIRE(std::bit_cast<std::uint64_t>(out[i]) == std::bit_cast<std::uint64_t>(expect));
  }
}

TEST_CASE("reductions use the documented four-lane order") {
  std::vector<double> v = {1e16, 1.0, -1e16, 1.0, 3.0};
  // Lanes (1e16 + 1) + (-1e16 + 1) lose both ones; a left-to-right sum keeps one.
  CHECK(simd::sum(v) == 3.0);
  double sequential = 0.0;
  for (double t : v) sequential += t;
  CHECK(sequential == 4.0);
}
