#pragma once

// Martingale-coboundary decomposition on the Ulam grid:
//   g_omega   = sum_{i=0..K} P^i_{sigma^{-i} omega} phi_{sigma^{-i} omega}
//   psi_omega = phi_{sigma omega} o f_omega - g_{sigma omega} o f_omega + g_omega
// with phi_omega = phi - int phi dmu_omega. Composition with f_omega is the
// grid Koopman operator of the fiber's Ulam matrix.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quenched/maps.hpp"
#include "quenched/omega.hpp"
#include "quenched/transfer.hpp"

namespace quenched::decomp {

inline constexpr int kDefaultK = 16;
inline constexpr int kDefaultBins = 1 << 12;
inline constexpr int kDefaultDepth = 32;

struct Options {
  int subsamples = transfer::kDefaultSubsamples;
  int threads = 0;
};

struct CoboundaryG {
  transfer::GridFunction g;
  double first_term_l1 = 0.0;  // ||phi_omega||_{L1(mu_omega)}
  double last_term_l1 = 0.0;   // ||P^K phi_{sigma^{-K} omega}||_{L1(mu_omega)}
  bool converged = true;       // last term <= 10% of the first
  std::vector<std::string> warnings;
};

CoboundaryG coboundary_g(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc, int n_bins,
                         int depth, const Options& options = {});

struct Decomposition {
  int k_trunc = 0;
  transfer::GridFunction g;       // fiber omega
  transfer::GridFunction g_next;  // fiber sigma omega
  transfer::GridFunction psi;     // fiber omega
  transfer::GridDensity h;        // h_omega
  double residual = 0.0;          // ||P_omega psi_omega||_{L1(mu_{sigma omega})}
  double sigma2_fiber = 0.0;      // int psi^2 dmu_omega
  double truncation_tail = 0.0;   // last-term L1 size of the g series on fiber omega
  double masked_fraction = 0.0;
  double sup_g = 0.0;
  double phi_l2 = 0.0;            // int phi_omega^2 dmu_omega
  std::vector<std::string> warnings;
};

Decomposition martingale_psi(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc, int n_bins,
                             int depth, const Options& options = {});

// g_t, psi_t on consecutive fibers 0..last. g_0 is the K-term series; later
// fibers use the exact recursion g_{t+1} = phi_{t+1} + P_t g_t, so the
// telescoped identity holds on the grid.
class DecompositionChain {
 public:
  DecompositionChain(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc, int n_bins, int depth,
                     std::int64_t last, const Options& options = {});

  std::int64_t last() const { return static_cast<std::int64_t>(psi_.size()) - 1; }
  int n_bins() const { return n_bins_; }
  // t in [0, last + 1] for g, phi and h; t in [0, last] for psi.
  const std::vector<double>& g(std::int64_t t) const { return g_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& phi(std::int64_t t) const { return phi_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& psi(std::int64_t t) const { return psi_.at(static_cast<std::size_t>(t)); }
  const transfer::GridDensity& h(std::int64_t t) const { return h_.at(static_cast<std::size_t>(t)); }
  // Nearest-bin lookup of a grid function at x.
  static double lookup(const std::vector<double>& values, double x);

 private:
  int n_bins_;
  std::vector<std::vector<double>> g_;
  std::vector<std::vector<double>> phi_;
  std::vector<std::vector<double>> psi_;
  std::vector<transfer::GridDensity> h_;
};

struct SigmaEstimate {
  double sigma2 = 0.0;
  double std_err = 0.0;  // across seeds; 0 for a single seed
  double phi_l2 = 0.0;   // E int phi_omega^2 dmu_omega
  std::vector<double> per_seed;
  std::vector<double> residuals;
};

struct Ensemble {
  Family family = Family::doubling;
  Interval bounds;
  std::vector<std::uint64_t> seeds;
  maps::Observable phi = maps::Observable::zero();
  int k_trunc = kDefaultK;
  int n_bins = kDefaultBins;
  int depth = kDefaultDepth;
  Options options;
};

SigmaEstimate sigma_squared(const Ensemble& ensemble);

struct CoboundaryVerdict {
  bool degenerate = false;
  double sigma2 = 0.0;
  double std_err = 0.0;
  double threshold = 0.0;   // 3 std_err + resolution_floor
  double resolution_floor = 0.0;
  // Mean and max of |phi_{t+1}(x_{t+1}) - g_{t+1}(x_{t+1}) + g_t(x_t)| along
  // sampled orbits; only evaluated for degenerate verdicts.
  std::optional<double> pointwise_residual;
  std::optional<double> pointwise_max;
};

// Degenerate iff sigma^2 < 3 standard errors plus the squared grid modulus
// of continuity of phi, (C_phi n_bins^-gamma)^2: variance below that level is
// not resolved by the grid. The floor matters when all seeds give the same
// fiber and the standard error vanishes.
CoboundaryVerdict coboundary_test(const Ensemble& ensemble, const SigmaEstimate& estimate,
                                  std::int64_t pointwise_samples = 2000, int orbit_length = 16,
                                  std::uint64_t sample_seed = 0);

// Draws x from the grid density rho: bin by inverse CDF, then uniform inside the bin.
double sample_from(const transfer::GridDensity& rho, std::span<const double> cdf, double u_bin, double u_inner);
std::vector<double> cumulative(const transfer::GridDensity& rho);

}  // namespace quenched::decomp
