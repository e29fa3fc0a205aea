#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "quenched/decomp.hpp"
#include "quenched/maps.hpp"
#include "quenched/numeric.hpp"
#include "quenched/rng.hpp"
#include "quenched/stats.hpp"
#include "quenched/transfer.hpp"

using namespace quenched;
using stats::Functional;
using stats::Sampling;

namespace {

const Interval kBounds{0.05, 0.15};

const stats::BirkhoffEnsemble& doubling_cos() {
  static const stats::BirkhoffEnsemble ens = stats::birkhoff_ensemble(
      omega::make_sequence(1, Family::doubling, {0, 0}), maps::Observable::cos2pi(), 4096, 10000, Sampling::equivariant);
  return ens;
}

double sample_variance(const std::vector<double>& v) {
  const auto ms = numeric::mean_se(v);
  double s = 0.0;
  for (double x : v) s += (x - ms.mean) * (x - ms.mean);
  return s / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Series for P(sup |B| <= a) on [0, 1].
double sup_abs_series(double a) {
  double s = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double m = 2.0 * k + 1.0;
    s += (k % 2 ? -1.0 : 1.0) / m * std::exp(-m * m * std::numbers::pi * std::numbers::pi / (8.0 * a * a));
  }
  return 4.0 / std::numbers::pi * s;
}

}  // namespace

TEST_CASE("birkhoff_ensemble trivial cases") {
  const auto seq = omega::make_sequence(3, Family::lsv, kBounds);
  const auto zero = stats::birkhoff_ensemble(seq, maps::Observable::zero(), 64, 200, Sampling::equivariant,
                                             {.n_bins = 1024});
  for (double v : zero.S) REQUIRE(v == 0.0);

  const auto phi = maps::Observable::cos2pi();
  const auto one = stats::birkhoff_ensemble(seq, phi, 1, 300, Sampling::lebesgue, {.n_bins = 1024});
  REQUIRE(one.S.size() == 600);
  for (std::int64_t s = 0; s < 300; ++s) {
    const auto key = derive_key(3, stream::birkhoff, static_cast<std::uint64_t>(s));
    const double x = to_unit(counter_hash(key, 0));
    CHECK(one.at(s, 0) == 0.0);
    CHECK(one.at(s, 1) == doctest::Approx(phi(maps::apply(maps::fiber(seq, 0), x), maps::fiber(seq, 1)) - one.centers[1])
                              .epsilon(1e-14)
                              .scale(1.0));
  }

  // Centers are the grid integrals against the equivariant densities.
  const auto ens = stats::birkhoff_ensemble(seq, phi, 4, 10, Sampling::equivariant, {.n_bins = 1024});
  for (std::int64_t k = 0; k <= 4; ++k) {
    const auto h = transfer::equivariant_density(seq.shifted(k), 1024, 32);
    const auto v = transfer::bin_average(phi, maps::fiber(seq, k), 1024);
    CHECK(ens.centers[static_cast<std::size_t>(k)] == doctest::Approx(transfer::integrate(v.values, h)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("birkhoff_ensemble is reproducible and thread independent") {
  const auto seq = omega::make_sequence(5, Family::lsv, kBounds);
  const auto a = stats::birkhoff_ensemble(seq, maps::Observable::cos2pi(), 100, 700, Sampling::equivariant,
                                          {.n_bins = 1024, .threads = 1});
  const auto b = stats::birkhoff_ensemble(seq, maps::Observable::cos2pi(), 100, 700, Sampling::equivariant,
                                          {.n_bins = 1024, .threads = 3});
  CHECK(a.S == b.S);
  const auto d1 = stats::birkhoff_ensemble(omega::make_sequence(1, Family::doubling, {0, 0}),
                                           maps::Observable::cos2pi(), 200, 600, Sampling::lebesgue, {.threads = 1});
  const auto d2 = stats::birkhoff_ensemble(omega::make_sequence(1, Family::doubling, {0, 0}),
                                           maps::Observable::cos2pi(), 200, 600, Sampling::lebesgue, {.threads = 2});
  CHECK(d1.S == d2.S);
}

TEST_CASE("doubling orbits do not collapse") {
  // Floating doubling would reach 0 after about 53 steps and freeze S.
  const auto& ens = doubling_cos();
  int moving = 0;
  for (std::int64_t s = 0; s < 100; ++s)
    if (ens.at(s, 4096) != ens.at(s, 4095)) ++moving;
  CHECK(moving >= 95);
}

TEST_CASE("doubling variance of S_n / sqrt n") {
  const auto& ens = doubling_cos();
  auto col = ens.column(4096);
  for (double& v : col) v /= std::sqrt(4096.0);
  CHECK(std::fabs(sample_variance(col) - 0.5) <= 0.03);
}

TEST_CASE("variance_growth examples") {
  const auto seq = omega::make_sequence(2, Family::lsv, kBounds);
  const auto zero = stats::birkhoff_ensemble(seq, maps::Observable::zero(), 64, 100, Sampling::equivariant, {.n_bins = 512});
  const auto zrows = stats::variance_growth(zero, {.bootstrap = 20});
  std::vector<std::int64_t> ns;
  for (const auto& r : zrows) {
    ns.push_back(r.n);
    CHECK(r.value == 0.0);
  }
  CHECK(ns == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32, 64});

  const auto rows = stats::variance_growth(doubling_cos());
  for (const auto& r : rows) {
    CHECK((r.ci_lo <= r.value && r.value <= r.ci_hi));
    if (r.n >= 256) {
      CAPTURE(r.n);
      CHECK((r.ci_lo <= 0.5 && 0.5 <= r.ci_hi));
    }
  }

  // Coboundary: sigma_n^2 stays bounded, so sigma_n^2 / n falls like 1/n.
  const auto cob = stats::birkhoff_ensemble(omega::make_sequence(1, Family::doubling, {0, 0}),
                                            maps::Observable::coboundary_cos(), 1024, 4000, Sampling::equivariant);
  const auto crows = stats::variance_growth(cob, {.bootstrap = 50});
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : crows)
    if (r.n >= 16) {
      x.push_back(std::log(static_cast<double>(r.n)));
      y.push_back(std::log(r.value));
    }
  const auto fit = numeric::fit_line(x, y);
  MESSAGE("coboundary log-log slope " << fit.slope);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("variance_growth agrees with the decomposition variance") {
  const auto seq = omega::make_sequence(1, Family::lsv, kBounds);
  const auto phi = maps::Observable::cos2pi();
  const auto ens = stats::birkhoff_ensemble(seq, phi, 4096, 10000, Sampling::equivariant);
  const auto rows = stats::variance_growth(ens, {.grid = {3072, 3584, 4096}});
  decomp::Ensemble e;
  e.family = Family::lsv;
  e.bounds = kBounds;
  e.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  e.phi = phi;
  const auto sigma = decomp::sigma_squared(e);
  constexpr double kZ = 2.5758293035489;  // two-sided 99% normal quantile
  for (const auto& r : rows) {
    const double se_boot = (r.ci_hi - r.ci_lo) / (2.0 * kZ);
    const double combined = std::hypot(se_boot, sigma.std_err);
    CAPTURE(r.n);
    MESSAGE("n " << r.n << ": " << r.value << " vs sigma^2 " << sigma.sigma2 << " (se " << combined << ")");
    CHECK(std::fabs(r.value - sigma.sigma2) <= 3.0 * combined);
  }
}

TEST_CASE("qclt_test examples") {
  const auto syn = stats::synthetic_ensemble(7, 16, 10000, 1.0);
  const auto k = stats::qclt_test(syn, 1.0);
  CHECK(k.statistic < 3.0 / std::sqrt(10000.0));
  CHECK(k.samples == 10000);
  CHECK(k.n == 16);

  const auto d = stats::qclt_test(doubling_cos(), 0.5);
  CHECK(d.statistic < 0.03);

  CHECK_THROWS_AS(stats::qclt_test(syn, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(stats::qclt_test(syn, -1.0), std::invalid_argument);
}

TEST_CASE("qclt_calibration holds its level") {
  const auto c = stats::qclt_calibration(3, 100, 32, 2000, 0.01);
  CHECK(c.repetitions == 100);
  CHECK(c.rejection_rate <= 0.05);
  MESSAGE("rejections " << c.rejections << " / 100");
}

TEST_CASE("qlil_envelope examples") {
  const auto seq = omega::make_sequence(2, Family::lsv, kBounds);
  const auto zero = stats::birkhoff_ensemble(seq, maps::Observable::zero(), 64, 50, Sampling::equivariant, {.n_bins = 512});
  const auto z = stats::qlil_envelope(zero, 1.0, 1.0);
  for (double v : z.per_sample_max) CHECK(v == 0.0);
  for (double v : z.per_sample_min) CHECK(v == 0.0);

  const double sigma = 1.3;
  const auto syn = stats::synthetic_ensemble(4, 1 << 14, 400, sigma);
  const auto s1 = stats::qlil_envelope(syn, sigma * sigma, 1.0);
  MESSAGE("synthetic c=1 median max / (sigma sqrt 2) " << s1.median_max / (sigma * std::numbers::sqrt2));
  CHECK(s1.median_max / (sigma * std::numbers::sqrt2) == doctest::Approx(1.0).epsilon(0.35));
  for (std::size_t i = 0; i < s1.per_sample_max.size(); ++i) CHECK(s1.per_sample_min[i] <= s1.per_sample_max[i]);

  const auto dbl = stats::birkhoff_ensemble(omega::make_sequence(1, Family::doubling, {0, 0}),
                                            maps::Observable::cos2pi(), 1 << 16, 512, Sampling::equivariant);
  const double sd = std::sqrt(0.5);
  const auto c2 = stats::qlil_envelope(dbl, 0.5, 2.0);
  std::vector<double> m = c2.per_sample_max;
  std::sort(m.begin(), m.end());
  const double q25 = m[m.size() / 4];
  const double q75 = m[3 * m.size() / 4];
  MESSAGE("doubling c=2 quartiles / sigma " << q25 / sd << " " << median(m) / sd << " " << q75 / sd);
  CHECK(q25 >= 0.5 * sd);
  CHECK(q75 <= 1.5 * sd);
}

TEST_CASE("brownian_cdf against closed forms") {
  for (double a : {0.1, 0.5, 1.0, 1.7, 3.0}) {
    CHECK(stats::brownian_cdf(Functional::sup, a) == doctest::Approx(2.0 * normal_cdf(a) - 1.0).epsilon(1e-14));
    CHECK(stats::brownian_cdf(Functional::terminal, a) == doctest::Approx(normal_cdf(a)).epsilon(1e-14));
  }
  for (double a : {0.3, 0.6, 0.99, 1.0, 1.01, 1.5, 2.5, 4.0}) {
    CAPTURE(a);
    CHECK(std::fabs(stats::brownian_cdf(Functional::sup_abs, a) - sup_abs_series(a)) <= 1e-12);
  }
  CHECK(stats::brownian_cdf(Functional::sup, -1.0) == 0.0);
  CHECK(stats::brownian_cdf(Functional::sup_abs, 0.0) == 0.0);
  CHECK(std::string(stats::functional_name(stats::parse_functional("sup_abs"))) == "sup_abs");
  CHECK_THROWS_AS(stats::parse_functional("inf"), std::invalid_argument);
}

TEST_CASE("Brownian oracle self-test") {
  const auto& oracle = stats::brownian_oracle();
  CHECK(&oracle == &stats::brownian_oracle());
  for (Functional f : {Functional::sup, Functional::sup_abs, Functional::terminal}) {
    const auto& v = oracle.values(f);
    REQUIRE(v.size() == 100000);
    const double ks = numeric::ks_distance(v, [f](double a) { return stats::brownian_cdf(f, a); });
    CAPTURE(stats::functional_name(f));
    CHECK(ks < 0.01);
  }
}

TEST_CASE("qfclt_paths examples") {
  const auto& oracle = stats::brownian_oracle();
  const auto& ens = doubling_cos();
  const auto terminal = stats::qfclt_paths(ens, 0.5, Functional::terminal, oracle);
  const auto q = stats::qclt_test(ens, 0.5);
  CHECK(terminal.ks_exact == q.statistic);
  CHECK(terminal.p_value == q.p_value);

  const auto sup_abs = stats::qfclt_paths(ens, 0.5, Functional::sup_abs, oracle);
  CHECK(sup_abs.ks_brownian < 0.05);
  const auto sup = stats::qfclt_paths(ens, 0.5, Functional::sup, oracle);
  CHECK(sup.ks_brownian < 0.05);
  for (double v : sup.values) CHECK(v >= 0.0);

  CHECK_THROWS_AS(stats::qfclt_paths(ens, 0.0, Functional::sup, oracle), std::invalid_argument);
}

TEST_CASE("asip_rate examples") {
  const auto r = stats::asip_rate({.D = 10});
  CHECK(r.epsilon_1 == 0.25);
  CHECK(r.epsilon_D == 0.1640625);
  CHECK_FALSE(r.arbitrarily_small);

  const auto e = stats::asip_rate({.exponential = true, .a = 1, .b = 1});
  CHECK(e.arbitrarily_small);
  CHECK(e.epsilon_0_lo == 0.0);
  CHECK(e.epsilon_0_hi == 0.25);

  try {
    stats::asip_rate({.p = 2, .D = 9});
    FAIL("inadmissible parameters accepted");
  } catch (const std::invalid_argument& ex) {
    CHECK(std::string(ex.what()).find("2 + 4p/(p-1)") != std::string::npos);
  }
  CHECK_THROWS_AS(stats::asip_rate({.p = 1, .D = 100}), std::invalid_argument);
  CHECK_THROWS_AS(stats::asip_rate({.D = 6}), std::invalid_argument);
  CHECK_NOTHROW(stats::asip_rate({.p = 2, .D = 10.5}));
}

TEST_CASE("asip_rate monotone in D") {
  for (double p : {1.5, 2.0, 5.0, std::numeric_limits<double>::infinity()}) {
    const double bound = std::isinf(p) ? 6.0 : 2.0 + 4.0 * p / (p - 1.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double D = bound + 0.5; D < bound + 200.0; D += 3.7) {
      const auto r = stats::asip_rate({.p = p, .D = D});
      CHECK(r.epsilon_1 < previous);
      CHECK(r.epsilon_D >= 0.0);
      previous = r.epsilon_1;
    }
    CHECK(stats::asip_rate({.p = p, .D = 1e9}).epsilon_D < 1e-8);
  }
}
