#pragma once

// Ulam discretization of the quenched transfer operators on a uniform grid of
// [0, 1], equivariant densities by finite pullback of Lebesgue, and the dual
// operator P_omega Psi = L_omega(Psi h_omega) / h_{sigma omega}.
//
// Measures are stored as bin masses (density = mass * n_bins), which keeps
// pushforward exactly mass conserving up to summation round-off.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "quenched/maps.hpp"
#include "quenched/numeric.hpp"
#include "quenched/omega.hpp"

namespace quenched::transfer {

inline constexpr int kDefaultSubsamples = 64;
inline constexpr double kMaskFloor = 1e-12;
inline constexpr double kMaxMaskedFraction = 0.10;

// Row-stochastic sparse matrix, CSR layout. Entry (i, j) is the fraction of
// bin i's Lebesgue mass sent into bin j.
struct TransferMatrix {
  int n_bins = 0;
  std::vector<std::int32_t> row_ptr;  // n_bins + 1 offsets
  std::vector<std::int32_t> col;
  std::vector<double> val;

  double at(int i, int j) const;
  double row_sum(int i) const;
  std::size_t nonzeros() const { return val.size(); }
};

struct GridDensity {
  std::vector<double> mass;

  static GridDensity uniform(int n_bins);
  static GridDensity point_mass(int n_bins, int bin);
  int n_bins() const { return static_cast<int>(mass.size()); }
  double density(int bin) const { return mass[static_cast<std::size_t>(bin)] * static_cast<double>(mass.size()); }
  double total() const;
};

struct GridFunction {
  std::vector<double> values;
  int n_bins() const { return static_cast<int>(values.size()); }
};

// Bin i = [i / n, (i + 1) / n); the last bin also holds x = 1.
int bin_of(double x, int n_bins);

// M[i][j] = (# of the `subsamples` stratum midpoints of bin i landing in bin j) / subsamples.
TransferMatrix ulam_matrix(const maps::FiberMap& map, int n_bins, int subsamples = kDefaultSubsamples);

// Shared, thread-safe cache keyed by (family, alpha, n_bins, subsamples).
std::shared_ptr<const TransferMatrix> cached_ulam_matrix(const maps::FiberMap& map, int n_bins,
                                                         int subsamples = kDefaultSubsamples);

// out[j] = sum_i in[i] M[i][j] for signed masses. Throws std::invalid_argument on size mismatch.
void push_masses(const TransferMatrix& m, std::span<const double> in, std::span<double> out);
GridDensity pushforward(const TransferMatrix& m, const GridDensity& rho);

// Grid Koopman operator (K v)[i] = sum_j M[i][j] v[j]; the adjoint of the
// Lebesgue pushforward on bin masses.
std::vector<double> koopman(const TransferMatrix& m, std::span<const double> values);

// Matrix of "a then b" (pushforward by a, then by b).
TransferMatrix compose(const TransferMatrix& a, const TransferMatrix& b);

// Midpoint-rule bin averages of phi on the given fiber.
GridFunction bin_average(const maps::Observable& phi, const maps::FiberMap& fiber, int n_bins,
                         int subsamples = kDefaultSubsamples);

// sum_i v[i] mass[i], arranged so that a constant v integrates to exactly that constant.
double integrate(std::span<const double> values, const GridDensity& rho);

// Densities h_t of one fiber sequence, advanced one fiber at a time.
// h_first is the pushforward of Lebesgue through fibers first-depth .. first-1,
// and every later density is the pushforward of its predecessor, so
// h_{t+1} = push_t(h_t) holds to round-off along the stream.
class DensityStream {
 public:
  DensityStream(const omega::ParamSequence& seq, int n_bins, int depth, std::int64_t first,
                int subsamples = kDefaultSubsamples);

  std::int64_t index() const { return index_; }
  const GridDensity& density() const { return density_; }
  // Matrix of fiber index(), mapping the current fiber to the next.
  const TransferMatrix& matrix() const { return *matrix_; }
  void advance();

 private:
  omega::ParamSequence seq_;
  int n_bins_;
  int subsamples_;
  std::int64_t index_;
  GridDensity density_;
  std::shared_ptr<const TransferMatrix> matrix_;
};

// Fibers first..last held in memory: densities h_t and matrices M_t.
class DensityWindow {
 public:
  DensityWindow(const omega::ParamSequence& seq, int n_bins, int depth, std::int64_t first, std::int64_t last,
                int subsamples = kDefaultSubsamples);

  std::int64_t first() const { return first_; }
  std::int64_t last() const { return first_ + static_cast<std::int64_t>(densities_.size()) - 1; }
  const GridDensity& density(std::int64_t t) const;
  const TransferMatrix& matrix(std::int64_t t) const;
  int n_bins() const { return n_bins_; }

 private:
  std::int64_t first_;
  int n_bins_;
  std::vector<GridDensity> densities_;
  std::vector<std::shared_ptr<const TransferMatrix>> matrices_;
};

// h_omega: Lebesgue pushed through the fibers of sigma^{-depth} omega, ..., sigma^{-1} omega.
GridDensity equivariant_density(const omega::ParamSequence& seq, int n_bins, int depth,
                                int subsamples = kDefaultSubsamples);

// ||push_omega(h_omega) - h_{sigma omega}||_1 with both densities pulled back
// independently at the same depth.
double equivariance_residual(const omega::ParamSequence& seq, int n_bins, int depth,
                             int subsamples = kDefaultSubsamples);

struct DualResult {
  GridFunction values;
  std::vector<std::uint8_t> masked;  // 1 where h_next < kMaskFloor
  double masked_fraction = 0.0;
};

// One dual step with explicit densities; throws NumericError when more than
// kMaxMaskedFraction of the bins are masked.
DualResult dual_step(const TransferMatrix& m, const GridDensity& h, const GridDensity& h_next,
                     std::span<const double> psi);

// P_omega Psi with h_omega from a depth-`depth` pullback and h_{sigma omega} = push_omega(h_omega).
DualResult dual_apply(const omega::ParamSequence& seq, const GridFunction& psi, int n_bins, int depth,
                      int subsamples = kDefaultSubsamples);

struct DecayRow {
  std::int64_t n = 0;
  double estimate = 0.0;
  double std_err = 0.0;
};

struct DecayCurve {
  std::vector<DecayRow> rows;
  numeric::PowerLawFit fit;
  double max_masked_fraction = 0.0;
  std::vector<std::string> warnings;
};

struct DecayOptions {
  int subsamples = kDefaultSubsamples;
  double fit_lo = 1.0;
  double fit_hi = 0.0;  // 0 = n_max
  int threads = 0;
};

// E int |P^n_omega (phi_omega - int phi_omega dmu_omega)| dmu_{sigma^n omega}
// averaged over omega = seeds, for n = 0..n_max.
DecayCurve decay_curve(Family family, Interval bounds, std::span<const std::uint64_t> seeds,
                       const maps::Observable& phi, std::int64_t n_max, int n_bins, int depth,
                       const DecayOptions& options = {});

}  // namespace quenched::transfer
