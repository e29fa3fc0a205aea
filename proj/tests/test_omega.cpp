#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "quenched/numeric.hpp"
#include "quenched/omega.hpp"

using namespace quenched;
using omega::ParamSequence;

TEST_CASE("make_sequence examples") {
  const auto seq = omega::make_sequence(42, Family::lsv, {0.05, 0.15});
  CHECK(seq.origin_offset() == 0);
  CHECK(seq.param(0) >= 0.05);
  CHECK(seq.param(0) <= 0.15);

  const auto dbl = omega::make_sequence(42, Family::doubling, {0.0, 0.0});
  for (std::int64_t i = -50; i <= 50; ++i) CHECK(dbl.param(i) == 0.0);

  // Two independently constructed sequences stand in for two processes.
  const auto again = omega::make_sequence(42, Family::lsv, {0.05, 0.15});
  CHECK(std::bit_cast<std::uint64_t>(seq.param(-3)) == std::bit_cast<std::uint64_t>(again.param(-3)));
}

TEST_CASE("make_sequence rejects bad bounds") {
  CHECK_THROWS_AS(omega::make_sequence(1, Family::lsv, {0.2, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(omega::make_sequence(1, Family::lsv, {0.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(omega::make_sequence(1, Family::lsv, {0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(omega::make_sequence(1, Family::doubling, {1.0, 0.0}), std::invalid_argument);
  CHECK_NOTHROW(omega::make_sequence(1, Family::lsv, {0.2, 0.2}));
}

TEST_CASE("shift examples and group law") {
  const auto seq = omega::make_sequence(7, Family::lsv, {0.05, 0.15});
  for (std::int64_t i = -20; i <= 20; ++i) {
    CHECK(omega::shift(seq, 0).param(i) == seq.param(i));
    CHECK(omega::shift(omega::shift(seq, 3), -3).param(i) == seq.param(i));
  }
  CHECK(omega::shift(seq, 2).param(-2) == seq.param(0));

  for (std::int64_t a : {-7, -1, 0, 2, 11})
    for (std::int64_t b : {-5, 0, 3, 9})
      for (std::int64_t i : {-13, -1, 0, 4, 100}) CHECK(omega::shift(omega::shift(seq, a), b).param(i) == seq.param(i + a + b));
}

TEST_CASE("params stays inside the bounds and matches param") {
  const auto seq = omega::make_sequence(99, Family::lsv, {0.05, 0.15});
  const auto block = seq.params(-500, 1000);
  for (std::size_t k = 0; k < block.size(); ++k) {
    CHECK(block[k] == seq.param(-500 + static_cast<std::int64_t>(k)));
    CHECK(block[k] >= 0.05);
    CHECK(block[k] <= 0.15);
  }
}

TEST_CASE("concurrent reads are bit-identical") {
  const auto seq = omega::make_sequence(5, Family::lsv, {0.05, 0.15});
  std::vector<double> a(20000), b(20000);
  std::thread t1([&] {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = seq.param(static_cast<std::int64_t>(i) - 10000);
  });
  std::thread t2([&] {
    for (std::size_t i = b.size(); i-- > 0;) b[i] = seq.param(static_cast<std::int64_t>(i) - 10000);
  });
  t1.join();
  t2.join();
  CHECK(a == b);
}

TEST_CASE("parameters look i.i.d. uniform") {
  const auto seq = omega::make_sequence(2024, Family::lsv, {0.05, 0.15});
  const std::size_t n = 100000;
  const auto v = seq.params(-static_cast<std::int64_t>(n / 2), n);
  const double ks = numeric::ks_distance(v, [](double x) { return std::clamp((x - 0.05) / 0.1, 0.0, 1.0); });
  CHECK(ks < 0.01);

  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  for (std::size_t lag = 1; lag <= 4; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (v[i] - mean) * (v[i + lag] - mean);
    CAPTURE(lag);
    CHECK(std::fabs(c / var) < 0.02);
  }
}

TEST_CASE("splicing switches to the tail sequence at the splice index") {
  const auto a = omega::make_sequence(1, Family::lsv, {0.05, 0.15});
  const auto b = omega::make_sequence(2, Family::lsv, {0.05, 0.15});
  const auto s = a.spliced(b, 5);
  for (std::int64_t i = -5; i < 5; ++i) CHECK(s.param(i) == a.param(i));
  for (std::int64_t i = 5; i < 20; ++i) CHECK(s.param(i) == b.param(i));
  // Shifting moves the splice point with the origin.
  const auto shifted = s.shifted(3);
  CHECK(shifted.param(1) == a.param(4));
  CHECK(shifted.param(2) == b.param(5));
  CHECK_THROWS_AS(a.spliced(omega::make_sequence(3, Family::doubling, {0, 0}), 1), std::invalid_argument);
}
