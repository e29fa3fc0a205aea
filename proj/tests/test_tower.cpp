#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "quenched/maps.hpp"
#include "quenched/rng.hpp"
#include "quenched/tower.hpp"

using namespace quenched;
using tower::ReturnMode;

namespace {

const Interval kBounds{0.05, 0.15};

// Plain orbit scan for the first base visit.
std::int64_t scan_return(const omega::ParamSequence& seq, double x, std::int64_t cap) {
  for (std::int64_t n = 1; n <= cap; ++n) {
    x = maps::apply(maps::fiber(seq, n - 1), x);
    if (x >= 0.5) return n;
    if (x == 0.0) return -1;
  }
  return -1;
}

}  // namespace

TEST_CASE("return_time examples") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto seq = omega::make_sequence(seed, Family::lsv, kBounds);
    const auto r = tower::return_time(seq, 0.8);
    CHECK(r.R == 1);
    CHECK_FALSE(r.capped);
    CHECK(r.image == maps::apply(maps::fiber(seq, 0), 0.8));
  }
  const auto dbl = omega::make_sequence(1, Family::doubling, {0, 0});
  CHECK(tower::return_time(dbl, 0.5, 1000).capped);

  const auto seq = omega::make_sequence(1, Family::lsv, kBounds);
  const auto r = tower::return_time(seq, 0.51, 1000000);
  CHECK_FALSE(r.capped);
  CHECK(r.R == scan_return(seq, 0.51, 1000000));
  CHECK_THROWS_AS(tower::return_time(seq, 0.4), std::domain_error);
}

TEST_CASE("return_time agrees with an orbit scan and records the itinerary") {
  const auto seq = omega::make_sequence(4, Family::lsv, kBounds);
  SplitMix64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = 0.5 + 0.5 * rng.uniform();
    const auto first = tower::return_time(seq, x, 100000, ReturnMode::first, true);
    const auto markov = tower::return_time(seq, x, 100000, ReturnMode::markov);
    CHECK(first.R == scan_return(seq, x, 100000));
    CHECK(markov.R == first.R);
    REQUIRE(first.itinerary.size() == static_cast<std::size_t>(first.R));
    CHECK(first.itinerary.front() == 'R');
    for (std::size_t k = 1; k < first.itinerary.size(); ++k) CHECK(first.itinerary[k] == 'L');
  }
}

TEST_CASE("nth_return examples") {
  const auto seq = omega::make_sequence(3, Family::lsv, kBounds);
  CHECK(tower::nth_return(seq, 0.77, 0).value == 0);
  CHECK(tower::nth_return(seq, 0.77, 1).value == tower::return_time(seq, 0.77).R);

  // Unrolled recursion with shifted sequences.
  double x = 0.77;
  std::int64_t total = 0;
  for (int k = 0; k < 5; ++k) {
    const auto r = tower::return_time(omega::shift(seq, total), x);
    REQUIRE_FALSE(r.capped);
    total += r.R;
    x = r.image;
  }
  const auto n5 = tower::nth_return(seq, 0.77, 5);
  CHECK(n5.value == total);
  CHECK(n5.point == x);
}

TEST_CASE("hit_time matches return_time on the base") {
  const auto seq = omega::make_sequence(6, Family::lsv, kBounds);
  CHECK(tower::hit_time(seq, 0.9) == tower::return_time(seq, 0.9).R);
  CHECK(tower::hit_time(seq, 0.3).value() == scan_return(seq, 0.3, 1000000));
  CHECK_FALSE(tower::hit_time(seq, 0.0, 100).has_value());
}

TEST_CASE("build_partition examples") {
  for (std::uint64_t seed : {1u, 5u, 9u}) {
    const auto seq = omega::make_sequence(seed, Family::lsv, kBounds);
    const auto part = tower::build_partition(seq, 64);
    REQUIRE_FALSE(part.cells.empty());
    CHECK(part.cells[0].R == 1);
    CHECK(part.cells[0].lo == 0.75);
    CHECK(part.cells[0].hi == 1.0);

    const auto one = tower::build_partition(seq, 1);
    REQUIRE(one.cells.size() == 1);
    CHECK(one.cells[0].R == 1);
    CHECK(one.residual == doctest::Approx(0.5).epsilon(1e-12));
  }
  const auto dbl = omega::make_sequence(1, Family::doubling, {0, 0});
  const auto part = tower::build_partition(dbl, 10);
  CHECK(part.cells[0].mass == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(part.cells[1].R == 2);
  CHECK(part.cells[1].mass == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(part.cells[1].lo == doctest::Approx(0.625));
  CHECK(part.cells[1].hi == doctest::Approx(0.75));
}

TEST_CASE("partition mass bookkeeping and Markov images") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto seq = omega::make_sequence(seed, Family::lsv, kBounds);
    const auto part = tower::build_partition(seq, 200);
    double total = part.residual;
    for (const auto& c : part.cells) total += c.mass;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 0; i < part.cells.size(); ++i) {
      const auto& c = part.cells[i];
      CHECK(c.markov_ok);
      CHECK(std::fabs(c.image_lo - 0.5) <= 1e-9);
      CHECK(std::fabs(c.image_hi - 1.0) <= 1e-9);
      if (i > 0) CHECK(c.R > part.cells[i - 1].R);
    }
    // Cells tile Lambda from the top down.
    for (std::size_t i = 1; i < part.cells.size(); ++i) CHECK(part.cells[i].hi == doctest::Approx(part.cells[i - 1].lo));
  }
}

TEST_CASE("partition cells agree with return times of interior points") {
  const auto seq = omega::make_sequence(8, Family::lsv, kBounds);
  const auto part = tower::build_partition(seq, 40);
  for (const auto& c : part.cells) {
    const double y = c.y_lo + 0.5 * (c.y_hi - c.y_lo);
    const double x = 0.5 + 0.5 * y;
    if (x <= 0.5) continue;
    CAPTURE(c.R);
    CHECK(tower::return_time(seq, x).R == c.R);
    const auto where = tower::locate(part, x);
    REQUIRE(where.has_value());
    CHECK(part.cells[*where].R == c.R);
  }
}

TEST_CASE("return-time cells are stopping times") {
  const auto a = omega::make_sequence(1, Family::lsv, kBounds);
  const auto b = omega::make_sequence(2, Family::lsv, kBounds);
  for (std::int64_t n : {2, 5, 12}) {
    const auto spliced = a.spliced(b, n);
    const auto pa = tower::build_partition(a, 30);
    const auto ps = tower::build_partition(spliced, 30);
    // {R = k} for k <= n only depends on omega_0 .. omega_{k-1}.
    for (std::size_t i = 0; i < pa.cells.size() && pa.cells[i].R <= n; ++i) {
      CAPTURE(n);
      CAPTURE(pa.cells[i].R);
      CHECK(ps.cells[i].R == pa.cells[i].R);
      CHECK(ps.cells[i].y_lo == pa.cells[i].y_lo);
      CHECK(ps.cells[i].y_hi == pa.cells[i].y_hi);
    }
    // Beyond the splice the cells change.
    bool differs = false;
    for (std::size_t i = 0; i < pa.cells.size(); ++i)
      if (pa.cells[i].R > n + 1 && pa.cells[i].y_lo != ps.cells[i].y_lo) differs = true;
    CHECK(differs);
  }
}

TEST_CASE("return thresholds give the exact per-omega tail") {
  const auto seq = omega::make_sequence(2, Family::lsv, kBounds);
  const auto z = tower::return_thresholds(seq, 10);
  CHECK(z[0] == 0.5);
  for (std::size_t k = 1; k < z.size(); ++k) CHECK(z[k] < z[k - 1]);
  const auto part = tower::build_partition(seq, 11);
  // Leb(R > n | Lambda) = z_{n-1} in the y coordinate.
  for (std::int64_t n = 1; n <= 10; ++n) {
    double above = 0.0;
    for (const auto& c : part.cells)
      if (c.R > n) above += c.mass;
    above += part.residual;
    CHECK(above == doctest::Approx(z[static_cast<std::size_t>(n - 1)]).epsilon(1e-9));
  }
}

TEST_CASE("gcd_check examples") {
  const auto seq = omega::make_sequence(5, Family::lsv, kBounds);
  const auto part = tower::build_partition(seq, 64);
  CHECK(tower::gcd_check(part, 0.01) == 1);

  std::vector<tower::Cell> artificial(2);
  artificial[0].R = 2;
  artificial[0].mass = 0.6;
  artificial[1].R = 4;
  artificial[1].mass = 0.3;
  CHECK(tower::gcd_check(artificial, 0.01) == 2);
  artificial[1].R = 1;
  artificial[1].mass = 0.3;
  CHECK(tower::gcd_check(artificial, 0.01) == 1);
  CHECK_THROWS_AS(tower::gcd_check(artificial, 0.9), std::invalid_argument);
}

TEST_CASE("separation_time examples") {
  const auto seq = omega::make_sequence(9, Family::lsv, kBounds);
  CHECK_FALSE(tower::separation_time(seq, 0.8, 0.8, 100).value.has_value());
  // 0.7 has R >= 2, 0.9 has R = 1.
  CHECK(tower::separation_time(seq, 0.7, 0.9, 100).value == 0);

  // Cell-membership trace of both orbits.
  double x = 0.76;
  double y = 0.98;
  omega::ParamSequence current = seq;
  std::int64_t expected = -1;
  for (std::int64_t n = 0; n < 100; ++n) {
    const auto px = tower::build_partition(current, 200);
    const auto cx = tower::locate(px, x);
    const auto cy = tower::locate(px, y);
    REQUIRE(cx.has_value());
    REQUIRE(cy.has_value());
    if (*cx != *cy) {
      expected = n;
      break;
    }
    const std::int64_t R = px.cells[*cx].R;
    x = tower::return_time(current, x).image;
    y = tower::return_time(current, y).image;
    current = current.shifted(R);
  }
  REQUIRE(expected >= 0);
  CHECK(tower::separation_time(seq, 0.76, 0.98, 100).value == expected);
}

TEST_CASE("distortion_check examples") {
  const auto dbl = omega::make_sequence(1, Family::doubling, {0, 0});
  const auto dpart = tower::build_partition(dbl, 20);
  const auto drep = tower::distortion_check(dbl, dpart, 2000, 1);
  CHECK(drep.max_deviation == 0.0);
  CHECK(drep.violations == 0);

  // R = 1 cell alone: expansion exactly 2.
  const auto seq = omega::make_sequence(3, Family::lsv, kBounds);
  const auto one = tower::build_partition(seq, 1);
  const auto r1 = tower::distortion_check(seq, one, 500, 2);
  CHECK(r1.min_expansion == doctest::Approx(2.0).epsilon(1e-9));

  const auto part = tower::build_partition(seq, 64);
  const auto rep = tower::distortion_check(seq, part, 10000, 3);
  CHECK(rep.pairs == 10000);
  CHECK(rep.violations == 0);
  CHECK(rep.beta_hat <= 0.5 + 1e-9);
  CHECK(std::isfinite(rep.empirical_cf));
  MESSAGE("LSV empirical C_F " << rep.empirical_cf << ", beta_hat " << rep.beta_hat);
}

TEST_CASE("tail_curve basics") {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  // Doubling fibers coincide, so one seed gives the within-sample standard
  // error. 3.9158 SE per row is the two-sided 3-sigma level held jointly over 30 rows.
  const std::vector<std::uint64_t> single{1};
  const auto dbl = tower::tail_curve(Family::doubling, {0, 0}, single, 30, 100000, {2, 25});
  CHECK(dbl.rows[0].estimate == 1.0);
  for (std::int64_t n = 1; n <= 30; ++n) {
    const auto& r = dbl.rows[static_cast<std::size_t>(n)];
    CAPTURE(n);
    CHECK(std::fabs(r.estimate - std::ldexp(1.0, static_cast<int>(-n))) <= 3.9158 * r.std_err + 1e-15);
  }
  const auto lsv = tower::tail_curve(Family::lsv, kBounds, seeds, 2000, 50000, {10, 2000});
  CHECK(lsv.rows[0].estimate == 1.0);
  for (std::size_t n = 1; n < lsv.rows.size(); ++n) CHECK(lsv.rows[n].estimate <= lsv.rows[n - 1].estimate);
  CHECK(lsv.capped_fraction <= 0.01);
}

TEST_CASE("tail_curve matches the exact threshold tail of one omega") {
  const std::vector<std::uint64_t> seeds{4};
  const auto seq = omega::make_sequence(4, Family::lsv, kBounds);
  const auto z = tower::return_thresholds(seq, 500);
  const auto curve = tower::tail_curve(Family::lsv, kBounds, seeds, 500, 200000, {10, 500});
  for (std::int64_t n : {1, 2, 3, 10, 50, 100, 300, 500}) {
    const auto& r = curve.rows[static_cast<std::size_t>(n)];
    CAPTURE(n);
    CHECK(std::fabs(r.estimate - z[static_cast<std::size_t>(n - 1)]) <= 4.0 * r.std_err + 1e-12);
  }
}
