#include "quenched/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "quenched/errors.hpp"
#include "quenched/simd.hpp"

namespace quenched::transfer {

double TransferMatrix::at(int i, int j) const {
  for (auto k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
    if (col[static_cast<std::size_t>(k)] == j) return val[static_cast<std::size_t>(k)];
  return 0.0;
}

double TransferMatrix::row_sum(int i) const {
  double s = 0.0;
  for (auto k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
    s += val[static_cast<std::size_t>(k)];
  return s;
}

GridDensity GridDensity::uniform(int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("grid needs at least one bin");
  return GridDensity{std::vector<double>(static_cast<std::size_t>(n_bins), 1.0 / n_bins)};
}

GridDensity GridDensity::point_mass(int n_bins, int bin) {
  if (bin < 0 || bin >= n_bins) throw std::invalid_argument("point_mass: bin out of range");
  GridDensity rho{std::vector<double>(static_cast<std::size_t>(n_bins), 0.0)};
  rho.mass[static_cast<std::size_t>(bin)] = 1.0;
  return rho;
}

double GridDensity::total() const { return simd::sum(mass); }

int bin_of(double x, int n_bins) {
  const auto j = static_cast<int>(x * n_bins);
  return std::clamp(j, 0, n_bins - 1);
}

namespace {

std::vector<double> stratum_points(int n_bins, int subsamples) {
  std::vector<double> pts(static_cast<std::size_t>(n_bins) * static_cast<std::size_t>(subsamples));
  for (int i = 0; i < n_bins; ++i)
    for (int k = 0; k < subsamples; ++k)
      pts[static_cast<std::size_t>(i) * static_cast<std::size_t>(subsamples) + static_cast<std::size_t>(k)] =
          (static_cast<double>(i) + (static_cast<double>(k) + 0.5) / subsamples) / n_bins;
  return pts;
}

void check_grid(int n_bins, int subsamples) {
  if (n_bins < 2) throw std::invalid_argument("ulam_matrix: n_bins must be >= 2");
  if (subsamples < 1) throw std::invalid_argument("ulam_matrix: subsamples must be >= 1");
}

}  // namespace

TransferMatrix ulam_matrix(const maps::FiberMap& map, int n_bins, int subsamples) {
  check_grid(n_bins, subsamples);
  const std::vector<double> pts = stratum_points(n_bins, subsamples);
  std::vector<double> images(pts.size());
  maps::apply_batch(map, pts, images);

  TransferMatrix m;
  m.n_bins = n_bins;
  m.row_ptr.reserve(static_cast<std::size_t>(n_bins) + 1);
  m.row_ptr.push_back(0);
  m.col.reserve(static_cast<std::size_t>(n_bins) * 4);
  m.val.reserve(static_cast<std::size_t>(n_bins) * 4);
  std::vector<int> bins(static_cast<std::size_t>(subsamples));
  const double weight = 1.0 / subsamples;
  for (int i = 0; i < n_bins; ++i) {
    for (int k = 0; k < subsamples; ++k)
      bins[static_cast<std::size_t>(k)] =
          bin_of(images[static_cast<std::size_t>(i) * static_cast<std::size_t>(subsamples) + static_cast<std::size_t>(k)],
                 n_bins);
    // Images of a bin are monotone except across the branch point.
    if (!std::is_sorted(bins.begin(), bins.end())) std::sort(bins.begin(), bins.end());
    for (std::size_t k = 0; k < bins.size();) {
      std::size_t e = k;
      while (e < bins.size() && bins[e] == bins[k]) ++e;
      m.col.push_back(bins[k]);
      m.val.push_back(static_cast<double>(e - k) * weight);
      k = e;
    }
    m.row_ptr.push_back(static_cast<std::int32_t>(m.col.size()));
  }
  return m;
}

std::shared_ptr<const TransferMatrix> cached_ulam_matrix(const maps::FiberMap& map, int n_bins, int subsamples) {
  using Key = std::tuple<int, std::uint64_t, int, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const TransferMatrix>> cache;
  constexpr std::size_t kMaxEntries = 64;

  const double alpha = map.family == Family::doubling ? 0.0 : map.alpha;
  const Key key{static_cast<int>(map.family), std::bit_cast<std::uint64_t>(alpha), n_bins, subsamples};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const TransferMatrix>(ulam_matrix(map, n_bins, subsamples));
  std::lock_guard lock(mutex);
  if (cache.size() >= kMaxEntries) cache.clear();
  cache.emplace(key, built);
  return built;
}

void push_masses(const TransferMatrix& m, std::span<const double> in, std::span<double> out) {
  if (in.size() != static_cast<std::size_t>(m.n_bins) || out.size() != in.size())
    throw std::invalid_argument("pushforward: dimension mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    if (v == 0.0) continue;
    for (auto k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
      out[static_cast<std::size_t>(m.col[static_cast<std::size_t>(k)])] += v * m.val[static_cast<std::size_t>(k)];
  }
}

GridDensity pushforward(const TransferMatrix& m, const GridDensity& rho) {
  GridDensity out{std::vector<double>(rho.mass.size())};
  push_masses(m, rho.mass, out.mass);
  return out;
}

std::vector<double> koopman(const TransferMatrix& m, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(m.n_bins)) throw std::invalid_argument("koopman: dimension mismatch");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double s = 0.0;
    for (auto k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
      s += m.val[static_cast<std::size_t>(k)] * values[static_cast<std::size_t>(m.col[static_cast<std::size_t>(k)])];
    out[i] = s;
  }
  return out;
}

TransferMatrix compose(const TransferMatrix& a, const TransferMatrix& b) {
  if (a.n_bins != b.n_bins) throw std::invalid_argument("compose: dimension mismatch");
  const auto n = static_cast<std::size_t>(a.n_bins);
  TransferMatrix c;
  c.n_bins = a.n_bins;
  c.row_ptr.push_back(0);
  std::vector<double> row(n, 0.0);
  std::vector<std::int32_t> touched;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const auto mid = static_cast<std::size_t>(a.col[static_cast<std::size_t>(k)]);
      const double av = a.val[static_cast<std::size_t>(k)];
      for (auto l = b.row_ptr[mid]; l < b.row_ptr[mid + 1]; ++l) {
        const auto j = b.col[static_cast<std::size_t>(l)];
        if (row[static_cast<std::size_t>(j)] == 0.0) touched.push_back(j);
        row[static_cast<std::size_t>(j)] += av * b.val[static_cast<std::size_t>(l)];
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (auto j : touched) {
      c.col.push_back(j);
      c.val.push_back(row[static_cast<std::size_t>(j)]);
      row[static_cast<std::size_t>(j)] = 0.0;
    }
    touched.clear();
    c.row_ptr.push_back(static_cast<std::int32_t>(c.col.size()));
  }
  return c;
}

GridFunction bin_average(const maps::Observable& phi, const maps::FiberMap& fiber, int n_bins, int subsamples) {
  check_grid(n_bins, subsamples);
  GridFunction out{std::vector<double>(static_cast<std::size_t>(n_bins))};
  for (int i = 0; i < n_bins; ++i) {
    double s = 0.0;
    for (int k = 0; k < subsamples; ++k) {
      const double x = (static_cast<double>(i) + (static_cast<double>(k) + 0.5) / subsamples) / n_bins;
      s += phi(x, fiber);
    }
    out.values[static_cast<std::size_t>(i)] = s / subsamples;
  }
  return out;
}

double integrate(std::span<const double> values, const GridDensity& rho) {
  if (values.size() != rho.mass.size()) throw std::invalid_argument("integrate: dimension mismatch");
  if (values.empty()) return 0.0;
  const double anchor = values[0];
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += rho.mass[i] * (values[i] - anchor);
  return anchor + s;
}

namespace {

GridDensity pullback(const omega::ParamSequence& seq, int n_bins, int depth, std::int64_t target, int subsamples) {
  if (depth < 0) throw std::invalid_argument("pullback depth must be >= 0");
  GridDensity h = GridDensity::uniform(n_bins);
  for (std::int64_t t = target - depth; t < target; ++t)
    h = pushforward(*cached_ulam_matrix(maps::fiber(seq, t), n_bins, subsamples), h);
  return h;
}

}  // namespace

DensityStream::DensityStream(const omega::ParamSequence& seq, int n_bins, int depth, std::int64_t first,
                             int subsamples)
    : seq_(seq),
      n_bins_(n_bins),
      subsamples_(subsamples),
      index_(first),
      density_(pullback(seq, n_bins, depth, first, subsamples)),
      matrix_(cached_ulam_matrix(maps::fiber(seq, first), n_bins, subsamples)) {}

void DensityStream::advance() {
  density_ = pushforward(*matrix_, density_);
  ++index_;
  matrix_ = cached_ulam_matrix(maps::fiber(seq_, index_), n_bins_, subsamples_);
}

DensityWindow::DensityWindow(const omega::ParamSequence& seq, int n_bins, int depth, std::int64_t first,
                             std::int64_t last, int subsamples)
    : first_(first), n_bins_(n_bins) {
  if (last < first) throw std::invalid_argument("DensityWindow: empty range");
  DensityStream stream(seq, n_bins, depth, first, subsamples);
  for (std::int64_t t = first; t <= last; ++t) {
    densities_.push_back(stream.density());
    matrices_.push_back(cached_ulam_matrix(maps::fiber(seq, t), n_bins, subsamples));
    if (t < last) stream.advance();
  }
}

const GridDensity& DensityWindow::density(std::int64_t t) const {
  if (t < first_ || t > last()) throw std::out_of_range("DensityWindow: fiber outside window");
  return densities_[static_cast<std::size_t>(t - first_)];
}

const TransferMatrix& DensityWindow::matrix(std::int64_t t) const {
  if (t < first_ || t > last()) throw std::out_of_range("DensityWindow: fiber outside window");
  return *matrices_[static_cast<std::size_t>(t - first_)];
}

GridDensity equivariant_density(const omega::ParamSequence& seq, int n_bins, int depth, int subsamples) {
  return pullback(seq, n_bins, depth, 0, subsamples);
}

double equivariance_residual(const omega::ParamSequence& seq, int n_bins, int depth, int subsamples) {
  const GridDensity h0 = pullback(seq, n_bins, depth, 0, subsamples);
  const GridDensity h1 = pullback(seq, n_bins, depth, 1, subsamples);
  const GridDensity pushed = pushforward(*cached_ulam_matrix(maps::fiber(seq, 0), n_bins, subsamples), h0);
  return simd::abs_diff_sum(pushed.mass, h1.mass);
}

DualResult dual_step(const TransferMatrix& m, const GridDensity& h, const GridDensity& h_next,
                     std::span<const double> psi) {
  const std::size_t n = h.mass.size();
  if (psi.size() != n || h_next.mass.size() != n) throw std::invalid_argument("dual_apply: dimension mismatch");
  std::vector<double> weighted(n);
  for (std::size_t i = 0; i < n; ++i) weighted[i] = psi[i] * h.mass[i];
  std::vector<double> pushed(n);
  push_masses(m, weighted, pushed);

  DualResult out;
  out.values.values.assign(n, 0.0);
  out.masked.assign(n, 0);
  std::size_t masked = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (h_next.mass[j] < kMaskFloor) {
      out.masked[j] = 1;
      ++masked;
    } else {
      out.values.values[j] = pushed[j] / h_next.mass[j];
    }
  }
  out.masked_fraction = static_cast<double>(masked) / static_cast<double>(n);
  if (out.masked_fraction > kMaxMaskedFraction)
    throw NumericError("dual operator: masked-bin fraction " + std::to_string(out.masked_fraction) +
                       " exceeds the 10% limit");
  return out;
}

DualResult dual_apply(const omega::ParamSequence& seq, const GridFunction& psi, int n_bins, int depth,
                      int subsamples) {
  if (psi.n_bins() != n_bins) throw std::invalid_argument("dual_apply: dimension mismatch");
  const GridDensity h = pullback(seq, n_bins, depth, 0, subsamples);
  const auto m = cached_ulam_matrix(maps::fiber(seq, 0), n_bins, subsamples);
  const GridDensity h_next = pushforward(*m, h);
  return dual_step(*m, h, h_next, psi.values);
}

DecayCurve decay_curve(Family family, Interval bounds, std::span<const std::uint64_t> seeds,
                       const maps::Observable& phi, std::int64_t n_max, int n_bins, int depth,
                       const DecayOptions& options) {
  if (n_max < 1) throw std::invalid_argument("decay_curve: n_max must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("decay_curve: no seeds");
  omega::validate_bounds(family, bounds);
  const int threads = options.threads > 0 ? options.threads : numeric::default_threads();
  const std::size_t rows = static_cast<std::size_t>(n_max) + 1;

  std::vector<std::vector<double>> norms(seeds.size(), std::vector<double>(rows, 0.0));
  std::vector<double> masked(seeds.size(), 0.0);
  numeric::parallel_for(seeds.size(), threads, [&](std::size_t s) {
    const omega::ParamSequence seq(seeds[s], family, bounds);
    DensityStream stream(seq, n_bins, depth, 0, options.subsamples);
    const GridFunction values = bin_average(phi, maps::fiber(seq, 0), n_bins, options.subsamples);
    const double center = integrate(values.values, stream.density());

    // Signed mass v = (phi - c) h, pushed forward: P^n(phi - c) = L^n v / h_n.
    std::vector<double> v(static_cast<std::size_t>(n_bins));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (values.values[i] - center) * stream.density().mass[i];
    std::vector<double> next(v.size());
    for (std::size_t n = 0; n < rows; ++n) {
      const GridDensity& h = stream.density();
      double norm = 0.0;
      std::size_t masked_bins = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (h.mass[j] < kMaskFloor) {
          ++masked_bins;
          continue;
        }
        norm += std::fabs(v[j]);
      }
      norms[s][n] = norm;
      masked[s] = std::max(masked[s], static_cast<double>(masked_bins) / static_cast<double>(v.size()));
      if (n + 1 < rows) {
        push_masses(stream.matrix(), v, next);
        v.swap(next);
        stream.advance();
      }
    }
  });

  DecayCurve curve;
  curve.rows.resize(rows);
  std::vector<double> column(seeds.size());
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t s = 0; s < seeds.size(); ++s) column[s] = norms[s][n];
    const numeric::MeanSe ms = numeric::mean_se(column);
    curve.rows[n] = {static_cast<std::int64_t>(n), ms.mean, ms.std_err};
  }
  for (double m : masked) curve.max_masked_fraction = std::max(curve.max_masked_fraction, m);
  if (curve.max_masked_fraction > 0.0) curve.warnings.push_back("masked bins present along the orbit");
  if (curve.max_masked_fraction > kMaxMaskedFraction)
    throw NumericError("decay_curve: masked-bin fraction exceeds the 10% limit");

  std::vector<double> ns(rows);
  std::vector<double> values(rows);
  for (std::size_t n = 0; n < rows; ++n) {
    ns[n] = static_cast<double>(n);
    values[n] = curve.rows[n].estimate;
  }
  const double hi = options.fit_hi > 0.0 ? std::min(options.fit_hi, static_cast<double>(n_max))
                                          : static_cast<double>(n_max);
  curve.fit = numeric::fit_power_law(ns, values, std::max(1.0, options.fit_lo), hi);
  return curve;
}

}  // namespace quenched::transfer
