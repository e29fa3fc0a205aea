#include "quenched/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "quenched/maps.hpp"
#include "quenched/numeric.hpp"
#include "quenched/rng.hpp"

namespace quenched::coupling {

L0Estimate estimate_l0(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t l_max,
                       std::int64_t samples, int threads) {
  if (l_max < 1) throw std::invalid_argument("estimate_l0: l_max must be >= 1");
  if (samples < 1) throw std::invalid_argument("estimate_l0: samples must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("estimate_l0: no seeds");
  omega::validate_bounds(family, bounds);
  const std::size_t rows = static_cast<std::size_t>(l_max) + 1;
  std::vector<omega::ParamSequence> seqs;
  for (std::uint64_t s : seeds) seqs.emplace_back(s, family, bounds);

  constexpr std::int64_t kBlock = 4096;
  const auto blocks = static_cast<std::size_t>((samples + kBlock - 1) / kBlock);
  std::vector<std::vector<std::int64_t>> hits(blocks, std::vector<std::int64_t>(rows, 0));
  numeric::parallel_for(blocks, threads > 0 ? threads : numeric::default_threads(), [&](std::size_t b) {
    std::vector<std::uint8_t> seen(rows);
    const auto first = static_cast<std::int64_t>(b) * kBlock;
    for (std::int64_t i = first; i < std::min(samples, first + kBlock); ++i) {
      const omega::ParamSequence& seq = seqs[static_cast<std::size_t>(i) % seqs.size()];
      const std::uint64_t key = derive_key(seq.master_seed(), stream::l0);
      const double x = 0.5 + 0.5 * to_unit(counter_hash(key, static_cast<std::uint64_t>(i)));
      std::fill(seen.begin(), seen.end(), 0);
      seen[0] = 1;
      // Base visits of the orbit: every visit is a return time R^k.
      double p = x;
      for (std::int64_t t = 1; t <= l_max; ++t) {
        p = maps::apply(maps::fiber(seq, t - 1), p);
        if (p >= kBaseLeft) seen[static_cast<std::size_t>(t)] = 1;
      }
      for (std::size_t l = 0; l < rows; ++l) hits[b][l] += seen[l];
    }
  });

  L0Estimate out;
  const auto n = static_cast<double>(samples);
  for (std::size_t l = 0; l < rows; ++l) {
    std::int64_t total = 0;
    for (const auto& h : hits) total += h[l];
    const double p = static_cast<double>(total) / n;
    out.rows.push_back({static_cast<std::int64_t>(l), p, std::sqrt(p * (1.0 - p) / n)});
  }
  for (std::int64_t l = l_max; l >= 1 && out.rows[static_cast<std::size_t>(l)].epsilon > 0.0; --l)
    out.suggested_l0 = l;
  if (!out.suggested_l0) out.warnings.push_back("no l0 found up to l_max");
  return out;
}

namespace {

struct Advance {
  std::int64_t steps = 0;
  bool capped = false;   // cap reached or orbit absorbed at 0
  bool horizon = false;  // time budget exhausted first
};

// Steps both components until the mover has visited Lambda l0 times.
Advance advance_pair(const omega::ParamSequence& seq, std::int64_t t0, double& mover, double& other,
                     std::int64_t l0, std::int64_t cap, std::int64_t budget) {
  Advance a;
  std::int64_t since_visit = 0;
  std::int64_t visits = 0;
  while (visits < l0) {
    if (a.steps >= budget) {
      a.horizon = true;
      return a;
    }
    if (since_visit >= cap || mover == 0.0) {
      a.capped = true;
      return a;
    }
    const maps::FiberMap map = maps::fiber(seq, t0 + a.steps);
    mover = maps::apply(map, mover);
    other = maps::apply(map, other);
    ++a.steps;
    ++since_visit;
    if (mover >= kBaseLeft) {
      ++visits;
      since_visit = 0;
    }
  }
  return a;
}

}  // namespace

CouplingTrace match_pair(const omega::ParamSequence& seq, double x, double x_prime, std::int64_t l0,
                         std::int64_t cap, std::int64_t max_matches, std::int64_t horizon) {
  if (!(in_base(x) && x <= 1.0 && in_base(x_prime) && x_prime <= 1.0))
    throw std::domain_error("match_pair: points must lie in the base [1/2, 1]");
  if (l0 < 1) throw std::invalid_argument("match_pair: l0 must be >= 1");
  CouplingTrace tr;
  tr.x = x;
  tr.x_prime = x_prime;
  tr.l0 = l0;
  tr.taus.push_back(0);
  tr.positions_x.push_back(x);
  tr.positions_xp.push_back(x_prime);

  double px = x;
  double pxp = x_prime;
  std::int64_t t = 0;
  Component mover = Component::x;
  while (static_cast<std::int64_t>(tr.Ts.size()) < max_matches) {
    const Advance a = mover == Component::x ? advance_pair(seq, t, px, pxp, l0, cap, horizon - t)
                                            : advance_pair(seq, t, pxp, px, l0, cap, horizon - t);
    if (a.capped) {
      tr.capped = true;
      break;
    }
    if (a.horizon) {
      tr.horizon_reached = true;
      break;
    }
    t += a.steps;
    tr.taus.push_back(t);
    tr.movers.push_back(mover);
    tr.positions_x.push_back(px);
    tr.positions_xp.push_back(pxp);
    if (px >= kBaseLeft && pxp >= kBaseLeft) {
      tr.Ts.push_back(t);
      mover = Component::x;
    } else {
      mover = mover == Component::x ? Component::x_prime : Component::x;
    }
  }
  return tr;
}

CouplingTail coupling_tail(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t l0,
                           double alpha_exp, std::int64_t n_max, std::int64_t pair_samples, int threads) {
  if (!(alpha_exp > 0.0 && alpha_exp < 1.0)) throw std::invalid_argument("coupling_tail: alpha_exp must lie in (0, 1)");
  if (n_max < 1) throw std::invalid_argument("coupling_tail: n_max must be >= 1");
  if (pair_samples < 1) throw std::invalid_argument("coupling_tail: pair_samples must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("coupling_tail: no seeds");
  omega::validate_bounds(family, bounds);

  const auto match_index = [alpha_exp](std::int64_t n) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), alpha_exp))));
  };
  const std::int64_t k_max = match_index(n_max);
  std::vector<omega::ParamSequence> seqs;
  for (std::uint64_t s : seeds) seqs.emplace_back(s, family, bounds);

  std::vector<std::vector<std::int64_t>> match_times(static_cast<std::size_t>(pair_samples));
  std::vector<std::uint8_t> capped(static_cast<std::size_t>(pair_samples), 0);
  numeric::parallel_for(match_times.size(), threads > 0 ? threads : numeric::default_threads(), [&](std::size_t i) {
    const omega::ParamSequence& seq = seqs[i % seqs.size()];
    const std::uint64_t key = derive_key(seq.master_seed(), stream::coupling);
    const double x = 0.5 + 0.5 * to_unit(counter_hash(key, 2 * i));
    const double xp = 0.5 + 0.5 * to_unit(counter_hash(key, 2 * i + 1));
    const CouplingTrace tr = match_pair(seq, x, xp, l0, tower::kDefaultCap, k_max, n_max + 1);
    match_times[i] = tr.Ts;
    capped[i] = tr.capped ? 1 : 0;
  });

  CouplingTail out;
  const auto pairs = static_cast<double>(pair_samples);
  std::int64_t capped_total = 0;
  for (auto c : capped) capped_total += c;
  out.capped_fraction = static_cast<double>(capped_total) / pairs;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const std::int64_t k = match_index(n);
    std::int64_t survive = 0;
    for (const auto& ts : match_times)
      if (static_cast<std::int64_t>(ts.size()) < k || ts[static_cast<std::size_t>(k - 1)] > n) ++survive;
    const double p = static_cast<double>(survive) / pairs;
    out.rows.push_back({n, p, std::sqrt(p * (1.0 - p) / pairs), out.capped_fraction});
  }
  if (out.capped_fraction > 0.0) out.warnings.push_back("some pairs capped; scored as T > n");

  std::vector<double> ns;
  std::vector<double> tail;
  for (const CouplingRow& r : out.rows) {
    ns.push_back(static_cast<double>(r.n));
    tail.push_back(r.estimate);
  }
  out.log_linear = numeric::fit_log_linear(ns, tail, 1.0, static_cast<double>(n_max));
  out.power_law = numeric::fit_power_law(ns, tail, 1.0, static_cast<double>(n_max));
  return out;
}

}  // namespace quenched::coupling
