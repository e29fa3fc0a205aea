#pragma once

// Flat key=value experiment configuration shared by all subcommands.
//
// Lines are `key = value`; blank lines and lines starting with '#' are
// ignored. Command-line overrides use the same keys. Unknown keys, malformed
// values and out-of-range settings raise ConfigError.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quenched/family.hpp"
#include "quenched/maps.hpp"
#include "quenched/stats.hpp"

namespace quenched::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // Driving sequence and ensemble of omegas: seeds master_seed .. master_seed + n_seeds - 1.
  Family family = Family::lsv;
  double alpha_min = 0.05;
  double alpha_max = 0.15;
  std::uint64_t master_seed = 1;
  std::int64_t n_seeds = 10;

  // Grid and decomposition.
  int n_bins = 4096;
  int pullback_depth = 32;
  int subsamples = 64;
  int K_trunc = 16;

  // Observable; gamma is the Holder exponent, ramp width or constant value.
  std::string observable = "cos2pi";
  double gamma = 0.5;

  // Birkhoff ensembles.
  std::int64_t n_steps = 4096;
  std::int64_t n_samples = 10000;
  stats::Sampling sampling = stats::Sampling::equivariant;
  std::uint64_t sample_seed = 0;
  int bootstrap = 200;
  double ci_level = 0.99;
  double sigma2 = 0.0;  // 0 = estimate from the decomposition
  double ks_threshold = 0.03;

  // Return-time tail.
  std::int64_t tail_n_max = 10000;
  std::int64_t samples_per_omega = 100000;
  double fit_lo = 100.0;
  double fit_hi = 10000.0;

  // Partition, gcd and distortion.
  std::int64_t depth_cap = 64;
  double refine_tol = 1e-12;
  double mass_floor = 0.01;
  std::int64_t pair_samples = 1000;

  // Decay of correlations.
  std::int64_t decay_n_max = 64;

  // Coupling.
  std::int64_t l0 = 0;  // 0 = use the suggested l0
  std::int64_t l_max = 8;
  double alpha_exp = 0.1;
  std::int64_t couple_n_max = 200;
  std::int64_t couple_pairs = 10000;

  // Functional CLT.
  stats::Functional functional = stats::Functional::sup;
  std::int64_t oracle_paths = 100000;
  std::int64_t oracle_steps = 1024;
  std::uint64_t oracle_seed = 20240601;

  // ASIP rate calculator; p = inf is written "inf".
  double p = std::numeric_limits<double>::infinity();
  double D = 10.0;
  bool exponential = false;
  double a = 1.0;
  double b = 1.0;

  std::vector<std::uint64_t> seeds() const;
  Interval bounds() const { return {alpha_min, alpha_max}; }
  maps::Observable phi() const;
};

// Applies one setting; throws ConfigError for unknown keys or bad values.
void set_value(ExperimentConfig& config, std::string_view key, std::string_view value);

// Cross-field checks (bounds ordering, family admissibility, ranges).
void validate(const ExperimentConfig& config);

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Canonical key=value listing of every setting, in a fixed order.
std::vector<std::pair<std::string, std::string>> echo(const ExperimentConfig& config);
std::vector<std::string> known_keys();

}  // namespace quenched::cli
