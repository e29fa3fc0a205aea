#include "quenched/tower.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "quenched/maps.hpp"
#include "quenched/rng.hpp"
#include "quenched/simd.hpp"

namespace quenched::tower {

namespace {

void require_base(double x, const char* what) {
  if (!(x >= kBaseLeft && x <= 1.0)) throw std::domain_error(std::string(what) + ": point outside the base [1/2, 1]");
}

// Threshold z_k: preimage of 1/2 under left_{omega_k}, ..., left_{omega_1}.
double threshold(const omega::ParamSequence& seq, std::int64_t k) {
  double t = 0.5;
  for (std::int64_t j = k; j >= 1; --j) t = maps::left_branch_inverse(maps::fiber(seq, j), t);
  return t;
}

// Runs the left branches of omega_1..omega_steps from y, returning the final
// point and accumulating log f' along the way.
double left_walk(const omega::ParamSequence& seq, double y, std::int64_t steps, double* log_jacobian) {
  for (std::int64_t j = 1; j <= steps; ++j) {
    const maps::FiberMap map = maps::fiber(seq, j);
    if (log_jacobian != nullptr) *log_jacobian += std::log(maps::derivative(map, y));
    y = maps::left_branch(map, y);
  }
  return y;
}

}  // namespace

ReturnRecord return_time(const omega::ParamSequence& seq, double x, std::int64_t cap, ReturnMode mode,
                         bool record_itinerary) {
  require_base(x, "return_time");
  if (cap < 1) throw std::invalid_argument("return_time: cap must be >= 1");
  ReturnRecord rec;
  rec.x = x;
  rec.mode = mode;
  // The first-return partition is Markov for both families, so the two modes
  // share one orbit scan; the flag is carried for the caller's bookkeeping.
  double p = x;
  for (std::int64_t n = 1; n <= cap; ++n) {
    if (record_itinerary) rec.itinerary.push_back(p >= 0.5 ? 'R' : 'L');
    p = maps::apply(maps::fiber(seq, n - 1), p);
    if (p >= kBaseLeft) {
      rec.R = n;
      rec.image = p;
      return rec;
    }
  }
  rec.capped = true;
  return rec;
}

std::optional<std::int64_t> hit_time(const omega::ParamSequence& seq, double p, std::int64_t cap) {
  for (std::int64_t n = 1; n <= cap; ++n) {
    p = maps::apply(maps::fiber(seq, n - 1), p);
    if (p >= kBaseLeft) return n;
  }
  return std::nullopt;
}

NthReturn nth_return(const omega::ParamSequence& seq, double x, int n, std::int64_t cap) {
  require_base(x, "nth_return");
  if (n < 0) throw std::invalid_argument("nth_return: n must be non-negative");
  NthReturn out{0, x, false};
  for (int k = 0; k < n; ++k) {
    const ReturnRecord rec = return_time(seq.shifted(out.value), out.point, cap);
    if (rec.capped) {
      out.capped = true;
      return out;
    }
    out.value += rec.R;
    out.point = rec.image;
  }
  return out;
}

std::vector<double> return_thresholds(const omega::ParamSequence& seq, std::int64_t k) {
  std::vector<double> z;
  z.reserve(static_cast<std::size_t>(k) + 1);
  for (std::int64_t j = 0; j <= k; ++j) z.push_back(threshold(seq, j));
  return z;
}

ReturnPartition build_partition(const omega::ParamSequence& seq, std::int64_t depth_cap, double refine_tol) {
  if (depth_cap < 1) throw std::invalid_argument("build_partition: depth_cap must be >= 1");
  ReturnPartition part{seq, {}, depth_cap, refine_tol, 0.0};

  const auto markov_ok = [&](const Cell& c) {
    return std::fabs(c.image_lo - 0.5) <= refine_tol && std::fabs(c.image_hi - 1.0) <= refine_tol;
  };

  Cell first;
  first.lo = 0.75;
  first.hi = 1.0;
  first.y_lo = 0.5;
  first.y_hi = 1.0;
  first.R = 1;
  first.mass = 0.5;
  first.image_lo = maps::apply(maps::fiber(seq, 0), first.lo);
  first.image_hi = maps::apply(maps::fiber(seq, 0), first.hi);
  first.markov_ok = markov_ok(first);
  part.cells.push_back(first);

  double upper = 0.5;  // z_{n-2}
  for (std::int64_t n = 2; n <= depth_cap; ++n) {
    const double lower = threshold(seq, n - 1);
    // x-width is half the y-width; everything deeper is narrower still.
    if (0.5 * (upper - lower) < refine_tol) break;
    Cell c;
    c.y_lo = lower;
    c.y_hi = upper;
    c.lo = 0.5 + 0.5 * lower;
    c.hi = 0.5 + 0.5 * upper;
    c.R = n;
    c.mass = upper - lower;
    c.image_lo = left_walk(seq, lower, n - 1, nullptr);
    c.image_hi = left_walk(seq, upper, n - 1, nullptr);
    c.markov_ok = markov_ok(c);
    part.cells.push_back(c);
    upper = lower;
  }
  part.residual = upper;
  return part;
}

std::optional<std::size_t> locate(const ReturnPartition& partition, double x) {
  require_base(x, "locate");
  const double y = 2.0 * x - 1.0;
  for (std::size_t i = 0; i < partition.cells.size(); ++i) {
    const Cell& c = partition.cells[i];
    if (y >= c.y_lo && (y < c.y_hi || (c.R == 1 && y <= 1.0))) return i;
  }
  return std::nullopt;
}

std::int64_t gcd_check(std::span<const Cell> cells, double mass_floor) {
  std::int64_t g = 0;
  bool any = false;
  for (const Cell& c : cells) {
    if (c.mass > mass_floor) {
      g = std::gcd(g, c.R);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("gcd_check: no cell has mass above the floor");
  return g;
}

std::int64_t gcd_check(const ReturnPartition& partition, double mass_floor) {
  if (partition.cells.empty()) throw std::invalid_argument("gcd_check: empty partition");
  return gcd_check(partition.cells, mass_floor);
}

Separation separation_time(const omega::ParamSequence& seq, double x, double y, std::int64_t cap,
                           std::int64_t return_cap) {
  require_base(x, "separation_time");
  require_base(y, "separation_time");
  omega::ParamSequence current = seq;
  for (std::int64_t n = 0; n < cap; ++n) {
    if (x == y) return {};
    const ReturnRecord rx = return_time(current, x, return_cap);
    const ReturnRecord ry = return_time(current, y, return_cap);
    if (rx.capped || ry.capped) return {std::nullopt, true};
    if (rx.R != ry.R) return {n, false};
    x = rx.image;
    y = ry.image;
    current = current.shifted(rx.R);
  }
  return {};
}

DistortionReport distortion_check(const omega::ParamSequence& seq, const ReturnPartition& partition,
                                  std::int64_t pair_samples, std::uint64_t sample_seed, double beta,
                                  double rel_tol) {
  DistortionReport rep;
  if (partition.cells.empty() || pair_samples <= 0) return rep;
  constexpr std::int64_t kSeparationCap = 64;
  rep.min_expansion = std::numeric_limits<double>::infinity();
  SplitMix64 rng(derive_key(sample_seed, stream::distortion));
  const auto n_cells = static_cast<std::uint64_t>(partition.cells.size());

  while (rep.pairs < pair_samples) {
    const Cell& c = partition.cells[rng() % n_cells];
    const double y1 = c.y_lo + (c.y_hi - c.y_lo) * rng.uniform();
    const double y2 = c.y_lo + (c.y_hi - c.y_lo) * rng.uniform();
    if (y1 == y2) continue;

    double log_j1 = std::log(2.0);
    double log_j2 = std::log(2.0);
    const double img1 = left_walk(seq, y1, c.R - 1, &log_j1);
    const double img2 = left_walk(seq, y2, c.R - 1, &log_j2);
    if (!(img1 >= kBaseLeft && img2 >= kBaseLeft && img1 <= 1.0 && img2 <= 1.0)) continue;

    const double deviation = std::fabs(std::expm1(log_j1 - log_j2));
    const double expansion = std::fabs(img1 - img2) / (0.5 * std::fabs(y1 - y2));
    const Separation s = separation_time(seq.shifted(c.R), img1, img2, kSeparationCap);
    const double s_value = static_cast<double>(s.value.value_or(kSeparationCap));

    rep.max_deviation = std::max(rep.max_deviation, deviation);
    rep.empirical_cf = std::max(rep.empirical_cf, deviation / std::pow(beta, s_value));
    rep.min_expansion = std::min(rep.min_expansion, expansion);
    if (expansion < (1.0 / beta) * (1.0 - rel_tol)) ++rep.violations;
    ++rep.pairs;
  }
  rep.beta_hat = 1.0 / rep.min_expansion;
  return rep;
}

namespace {

struct TailAccumulator {
  std::vector<double> w;   // sum of weights by return time, index R (n_max+1 = beyond)
  std::vector<double> w2;
  std::int64_t capped = 0;
};

constexpr std::int64_t kTailBlock = 1 << 16;

// Return times of one block of importance samples for one fiber sequence.
TailAccumulator tail_block(Family family, std::span<const double> alphas, std::uint64_t key, std::int64_t first,
                           std::int64_t count, double y_min, std::int64_t n_max) {
  const double log_span = -std::log(y_min);
  TailAccumulator acc;
  acc.w.assign(static_cast<std::size_t>(n_max) + 2, 0.0);
  acc.w2.assign(acc.w.size(), 0.0);

  std::vector<double> active;
  std::vector<double> weight;
  active.reserve(static_cast<std::size_t>(count));
  weight.reserve(static_cast<std::size_t>(count));
  const auto record = [&](std::int64_t r, double w) {
    acc.w[static_cast<std::size_t>(r)] += w;
    acc.w2[static_cast<std::size_t>(r)] += w * w;
  };

  for (std::int64_t i = first; i < first + count; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const bool uniform_part = (counter_hash(key, 2 * idx) >> 63) != 0;
    const double u = 1.0 - to_unit(counter_hash(key, 2 * idx + 1));  // (0, 1]
    // Mixture of uniform and log-uniform on [y_min, 1]; [0, y_min) is added exactly by the caller.
    const double y = uniform_part ? y_min + (1.0 - y_min) * u : y_min * std::exp(log_span * (1.0 - u));
    const double density = 0.5 / (1.0 - y_min) + 0.5 / (y * log_span);
    const double w = 1.0 / density;
    if (y >= 0.5) {
      record(1, w);
    } else {
      active.push_back(y);
      weight.push_back(w);
    }
  }

  for (std::int64_t k = 1; k <= n_max && !active.empty(); ++k) {
    if (family == Family::lsv) {
      simd::lsv_left(alphas[static_cast<std::size_t>(k - 1)], active);
    } else {
      for (double& v : active) v = 2.0 * v;
    }
    std::size_t keep = 0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (active[j] >= 0.5) {
        record(k + 1, weight[j]);
      } else if (active[j] <= 0.0) {
        ++acc.capped;
        record(n_max + 1, weight[j]);
      } else {
        active[keep] = active[j];
        weight[keep] = weight[j];
        ++keep;
      }
    }
    active.resize(keep);
    weight.resize(keep);
  }
  for (double w : weight) record(n_max + 1, w);
  return acc;
}

}  // namespace

TailCurve tail_curve(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t n_max,
                     std::int64_t samples_per_omega, const TailOptions& options) {
  if (n_max < 2) throw std::invalid_argument("tail_curve: n_max must be >= 2");
  if (samples_per_omega < 2) throw std::invalid_argument("tail_curve: need at least 2 samples per omega");
  if (seeds.empty()) throw std::invalid_argument("tail_curve: no seeds");
  omega::validate_bounds(family, bounds);
  const int threads = options.threads > 0 ? options.threads : numeric::default_threads();

  const std::size_t n_rows = static_cast<std::size_t>(n_max) + 1;
  const auto n_samples = static_cast<double>(samples_per_omega);
  std::vector<std::vector<double>> per_seed(seeds.size(), std::vector<double>(n_rows, 0.0));
  std::vector<std::vector<double>> per_seed_se(seeds.size(), std::vector<double>(n_rows, 0.0));
  std::vector<double> n_eff(n_rows, 0.0);
  std::int64_t capped = 0;

  const std::int64_t blocks = (samples_per_omega + kTailBlock - 1) / kTailBlock;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const omega::ParamSequence seq(seeds[s], family, bounds);
    const std::vector<double> alphas = seq.params(1, static_cast<std::size_t>(n_max));
    // Points below z_{n_max} return after more than n_max + 1 steps.
    const double y_min = std::max(0.5 * threshold(seq, n_max), 1e-300);
    const std::uint64_t key = derive_key(seeds[s], stream::tail);

    std::vector<TailAccumulator> parts(static_cast<std::size_t>(blocks));
    numeric::parallel_for(parts.size(), threads, [&](std::size_t b) {
      const std::int64_t first = static_cast<std::int64_t>(b) * kTailBlock;
      const std::int64_t count = std::min(kTailBlock, samples_per_omega - first);
      parts[b] = tail_block(family, alphas, key, first, count, y_min, n_max);
    });

    std::vector<double> w(n_rows + 1, 0.0);
    std::vector<double> w2(n_rows + 1, 0.0);
    for (const TailAccumulator& part : parts) {
      for (std::size_t r = 0; r < w.size(); ++r) {
        w[r] += part.w[r];
        w2[r] += part.w2[r];
      }
      capped += part.capped;
    }

    // Suffix sums give sum over samples with R > n.
    double tail_w = 0.0;
    double tail_w2 = 0.0;
    for (std::int64_t n = n_max; n >= 1; --n) {
      tail_w += w[static_cast<std::size_t>(n) + 1];
      tail_w2 += w2[static_cast<std::size_t>(n) + 1];
      const double mean = tail_w / n_samples + y_min;
      const double var = std::max(0.0, tail_w2 / n_samples - (mean - y_min) * (mean - y_min)) * n_samples / (n_samples - 1.0);
      per_seed[s][static_cast<std::size_t>(n)] = mean;
      per_seed_se[s][static_cast<std::size_t>(n)] = std::sqrt(var / n_samples);
      if (tail_w2 > 0.0) n_eff[static_cast<std::size_t>(n)] += tail_w * tail_w / tail_w2;
    }
    per_seed[s][0] = 1.0;
    n_eff[0] += n_samples;
  }

  TailCurve curve;
  curve.rows.resize(n_rows);
  std::vector<double> column(seeds.size());
  for (std::size_t n = 0; n < n_rows; ++n) {
    for (std::size_t s = 0; s < seeds.size(); ++s) column[s] = per_seed[s][n];
    const numeric::MeanSe ms = numeric::mean_se(column);
    TailRow& row = curve.rows[n];
    row.n = static_cast<std::int64_t>(n);
    row.estimate = ms.mean;
    row.std_err = seeds.size() > 1 ? ms.std_err : per_seed_se[0][n];
    row.n_eff = n_eff[n];
  }
  curve.rows[0].estimate = 1.0;
  curve.rows[0].std_err = 0.0;

  curve.capped_fraction = static_cast<double>(capped) / (n_samples * static_cast<double>(seeds.size()));
  if (curve.capped_fraction > 0.01) curve.warnings.push_back("capped fraction exceeds 1%");

  std::vector<double> ns(n_rows);
  std::vector<double> values(n_rows);
  for (std::size_t n = 0; n < n_rows; ++n) {
    ns[n] = static_cast<double>(n);
    values[n] = curve.rows[n].estimate;
  }
  curve.fit = numeric::fit_power_law(ns, values, std::max(1.0, options.fit_lo),
                                     std::min(options.fit_hi, static_cast<double>(n_max)));
  if (curve.fit.points < 2) curve.warnings.push_back("fit window holds fewer than two positive points");
  return curve;
}

}  // namespace quenched::tower
