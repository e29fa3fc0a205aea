#include "quenched/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

#include "quenched/coupling.hpp"
#include "quenched/decomp.hpp"
#include "quenched/errors.hpp"
#include "quenched/numeric.hpp"
#include "quenched/omega.hpp"
#include "quenched/stats.hpp"
#include "quenched/tower.hpp"
#include "quenched/transfer.hpp"

#ifndef QUENCHED_VERSION
#define QUENCHED_VERSION "0.0.0"
#endif

namespace quenched::cli {

namespace {

using Handler = std::function<Json(const ExperimentConfig&, OutputDir&)>;

Json warnings_json(const std::vector<std::string>& warnings) {
  Json out = Json::array();
  for (const auto& w : warnings) out.push_back(w);
  return out;
}

Json power_fit_json(const numeric::PowerLawFit& fit) {
  return Json{{"exponent", fit.exponent}, {"window_lo", fit.window_lo}, {"window_hi", fit.window_hi},
              {"r2", fit.r2}, {"points", fit.points}};
}

Json line_fit_json(const numeric::LineFit& fit) {
  return Json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"points", fit.points}};
}

omega::ParamSequence master_sequence(const ExperimentConfig& c) {
  return omega::make_sequence(c.master_seed, c.family, c.bounds());
}

Json run_tail(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.seeds();
  tower::TailOptions options;
  options.fit_lo = c.fit_lo;
  options.fit_hi = c.fit_hi;
  const auto curve = tower::tail_curve(c.family, c.bounds(), seeds, c.tail_n_max, c.samples_per_omega, options);
  Csv csv{"n", "tail_estimate", "std_err", "n_eff"};
  for (const auto& r : curve.rows) csv.cell(r.n).cell(r.estimate).cell(r.std_err).cell(r.n_eff).end_row();
  out.write_csv("tail.csv", csv);
  Json j{{"fit", power_fit_json(curve.fit)},
         {"capped_fraction", curve.capped_fraction},
         {"warnings", warnings_json(curve.warnings)}};
  if (c.family == Family::lsv && c.alpha_min == c.alpha_max) j["reference_exponent"] = 1.0 / c.alpha_min;
  out.write_json("tail.json", j);
  return j;
}

Json run_partition(const ExperimentConfig& c, OutputDir& out) {
  Csv csv{"seed", "cell", "lo", "hi", "R", "mass", "markov_ok"};
  Json per_seed = Json::array();
  std::int64_t overall_gcd = 0;
  for (std::uint64_t seed : c.seeds()) {
    const auto seq = omega::make_sequence(seed, c.family, c.bounds());
    const auto part = tower::build_partition(seq, c.depth_cap, c.refine_tol);
    for (std::size_t i = 0; i < part.cells.size(); ++i) {
      const auto& cell = part.cells[i];
      csv.cell(seed).cell(static_cast<std::int64_t>(i)).cell(cell.lo).cell(cell.hi).cell(cell.R).cell(cell.mass)
          .cell(std::int64_t{cell.markov_ok ? 1 : 0});
      csv.end_row();
    }
    const std::int64_t g = tower::gcd_check(part, c.mass_floor);
    overall_gcd = std::gcd(overall_gcd, g);
    const auto d = tower::distortion_check(seq, part, c.pair_samples, seed);
    per_seed.push_back(Json{{"seed", seed},
                            {"cells", part.cells.size()},
                            {"residual", part.residual},
                            {"gcd", g},
                            {"distortion",
                             {{"empirical_cf", d.empirical_cf},
                              {"max_deviation", d.max_deviation},
                              {"min_expansion", d.min_expansion},
                              {"beta_hat", d.beta_hat},
                              {"pairs", d.pairs},
                              {"violations", d.violations}}}});
  }
  out.write_csv("partition.csv", csv);
  Json j{{"mass_floor", c.mass_floor}, {"gcd", overall_gcd}, {"seeds", per_seed}};
  out.write_json("partition.json", j);
  return j;
}

Json run_density(const ExperimentConfig& c, OutputDir& out) {
  const auto seq = master_sequence(c);
  const auto h = transfer::equivariant_density(seq, c.n_bins, c.pullback_depth, c.subsamples);
  Csv csv{"bin", "x", "density"};
  for (int i = 0; i < c.n_bins; ++i)
    csv.cell(i).cell((i + 0.5) / c.n_bins).cell(h.density(i)).end_row();
  out.write_csv("density.csv", csv);

  const int shallow = std::min(4, c.pullback_depth);
  Csv res{"seed", "depth", "residual"};
  Json rows = Json::array();
  int improved = 0;
  for (std::uint64_t seed : c.seeds()) {
    const auto s = omega::make_sequence(seed, c.family, c.bounds());
    const double r_shallow = transfer::equivariance_residual(s, c.n_bins, shallow, c.subsamples);
    const double r_deep = transfer::equivariance_residual(s, c.n_bins, c.pullback_depth, c.subsamples);
    res.cell(seed).cell(std::int64_t{shallow}).cell(r_shallow).end_row();
    res.cell(seed).cell(std::int64_t{c.pullback_depth}).cell(r_deep).end_row();
    if (r_deep < r_shallow) ++improved;
    rows.push_back(Json{{"seed", seed}, {"shallow", r_shallow}, {"deep", r_deep}});
  }
  out.write_csv("equivariance.csv", res);
  Json j{{"shallow_depth", shallow},
         {"deep_depth", c.pullback_depth},
         {"seeds_improved", improved},
         {"residuals", rows}};
  out.write_json("density.json", j);
  return j;
}

Json run_decay(const ExperimentConfig& c, OutputDir& out) {
  transfer::DecayOptions options;
  options.subsamples = c.subsamples;
  const auto curve = transfer::decay_curve(c.family, c.bounds(), c.seeds(), c.phi(), c.decay_n_max, c.n_bins,
                                           c.pullback_depth, options);
  Csv csv{"n", "decay_estimate", "std_err"};
  for (const auto& r : curve.rows) csv.cell(r.n).cell(r.estimate).cell(r.std_err).end_row();
  out.write_csv("decay.csv", csv);
  Json j{{"fit", power_fit_json(curve.fit)},
         {"max_masked_fraction", curve.max_masked_fraction},
         {"warnings", warnings_json(curve.warnings)}};
  out.write_json("decay.json", j);
  return j;
}

decomp::Ensemble decomp_ensemble(const ExperimentConfig& c) {
  decomp::Ensemble e;
  e.family = c.family;
  e.bounds = c.bounds();
  e.seeds = c.seeds();
  e.phi = c.phi();
  e.k_trunc = c.K_trunc;
  e.n_bins = c.n_bins;
  e.depth = c.pullback_depth;
  e.options.subsamples = c.subsamples;
  return e;
}

Json run_decompose(const ExperimentConfig& c, OutputDir& out) {
  const auto seq = master_sequence(c);
  decomp::Options options;
  options.subsamples = c.subsamples;
  const auto d = decomp::martingale_psi(seq, c.phi(), c.K_trunc, c.n_bins, c.pullback_depth, options);
  Csv csv{"bin", "x", "g", "psi", "density"};
  for (int i = 0; i < c.n_bins; ++i) {
    const auto k = static_cast<std::size_t>(i);
    csv.cell(i).cell((i + 0.5) / c.n_bins).cell(d.g.values[k]).cell(d.psi.values[k]).cell(d.h.density(i)).end_row();
  }
  out.write_csv("decompose.csv", csv);

  const auto e = decomp_ensemble(c);
  const auto est = decomp::sigma_squared(e);
  const auto verdict = decomp::coboundary_test(e, est);
  Csv seeds{"seed", "sigma2", "residual"};
  for (std::size_t i = 0; i < e.seeds.size(); ++i)
    seeds.cell(e.seeds[i]).cell(est.per_seed[i]).cell(est.residuals[i]).end_row();
  out.write_csv("sigma2.csv", seeds);

  Json v{{"degenerate", verdict.degenerate},
         {"threshold", verdict.threshold},
         {"resolution_floor", verdict.resolution_floor}};
  if (verdict.pointwise_residual) v["pointwise_residual"] = *verdict.pointwise_residual;
  if (verdict.pointwise_max) v["pointwise_max"] = *verdict.pointwise_max;
  Json j{{"residual", d.residual},
         {"sigma2_fiber", d.sigma2_fiber},
         {"truncation_tail", d.truncation_tail},
         {"masked_fraction", d.masked_fraction},
         {"sup_g", d.sup_g},
         {"sigma2", est.sigma2},
         {"sigma2_std_err", est.std_err},
         {"phi_l2", est.phi_l2},
         {"coboundary", v},
         {"warnings", warnings_json(d.warnings)}};
  out.write_json("decompose.json", j);
  return j;
}

Json run_couple(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.seeds();
  const auto l0est = coupling::estimate_l0(c.family, c.bounds(), seeds, c.l_max, c.pair_samples);
  Csv l0csv{"l", "epsilon", "std_err"};
  for (const auto& r : l0est.rows) l0csv.cell(r.l).cell(r.epsilon).cell(r.std_err).end_row();
  out.write_csv("l0.csv", l0csv);
  std::int64_t l0 = c.l0;
  if (l0 == 0) {
    if (!l0est.suggested_l0) throw NumericError("no l0 in [0, l_max] has positive return mass; raise l_max");
    l0 = *l0est.suggested_l0;
  }
  const auto tail =
      coupling::coupling_tail(c.family, c.bounds(), seeds, l0, c.alpha_exp, c.couple_n_max, c.couple_pairs);
  Csv csv{"n", "tail_estimate", "std_err", "capped_fraction"};
  for (const auto& r : tail.rows) csv.cell(r.n).cell(r.estimate).cell(r.std_err).cell(r.capped_fraction).end_row();
  out.write_csv("coupling.csv", csv);
  std::vector<std::string> warnings = l0est.warnings;
  warnings.insert(warnings.end(), tail.warnings.begin(), tail.warnings.end());
  Json j{{"l0", l0},
         {"log_linear", line_fit_json(tail.log_linear)},
         {"power_law", power_fit_json(tail.power_law)},
         {"capped_fraction", tail.capped_fraction},
         {"warnings", warnings_json(warnings)}};
  out.write_json("coupling.json", j);
  return j;
}

struct SigmaChoice {
  double sigma2 = 0.0;
  double std_err = 0.0;
  bool estimated = false;
};

SigmaChoice choose_sigma2(const ExperimentConfig& c) {
  if (c.sigma2 > 0.0) return {c.sigma2, 0.0, false};
  const auto e = decomp_ensemble(c);
  const auto est = decomp::sigma_squared(e);
  const auto verdict = decomp::coboundary_test(e, est, 0);
  if (verdict.degenerate)
    throw NumericError("sigma^2 = " + format_double(est.sigma2) +
                       " is below the degeneracy threshold; the observable is a coboundary");
  return {est.sigma2, est.std_err, true};
}

stats::BirkhoffEnsemble ensemble_for(const ExperimentConfig& c) {
  stats::EnsembleOptions options;
  options.n_bins = c.n_bins;
  options.depth = c.pullback_depth;
  options.subsamples = c.subsamples;
  options.sample_seed = c.sample_seed;
  return stats::birkhoff_ensemble(master_sequence(c), c.phi(), c.n_steps, c.n_samples, c.sampling, options);
}

Json sigma_json(const SigmaChoice& s) {
  return Json{{"sigma2", s.sigma2}, {"sigma2_std_err", s.std_err}, {"sigma2_estimated", s.estimated}};
}

Json run_clt(const ExperimentConfig& c, OutputDir& out) {
  const SigmaChoice sigma = choose_sigma2(c);
  const auto ens = ensemble_for(c);

  stats::VarianceOptions vopt;
  vopt.bootstrap = c.bootstrap;
  vopt.level = c.ci_level;
  vopt.seed = c.sample_seed != 0 ? c.sample_seed : c.master_seed;
  const auto rows = stats::variance_growth(ens, vopt);
  Csv vcsv{"n", "variance_over_n", "ci_lo", "ci_hi"};
  for (const auto& r : rows) vcsv.cell(r.n).cell(r.value).cell(r.ci_lo).cell(r.ci_hi).end_row();
  out.write_csv("variance.csv", vcsv);

  const auto ks = stats::qclt_test(ens, sigma.sigma2);
  const double scale = 1.0 / std::sqrt(sigma.sigma2 * static_cast<double>(ens.n_steps));
  Csv zcsv{"sample", "z"};
  for (std::int64_t s = 0; s < ens.n_samples; ++s) zcsv.cell(s).cell(ens.at(s, ens.n_steps) * scale).end_row();
  out.write_csv("clt.csv", zcsv);

  Json j = sigma_json(sigma);
  j["n"] = ks.n;
  j["samples"] = ks.samples;
  j["ks_distance"] = ks.statistic;
  j["p_value"] = ks.p_value;
  j["ks_threshold"] = c.ks_threshold;
  j["verdict"] = ks.statistic < c.ks_threshold ? "pass" : "fail";
  out.write_json("clt.json", j);
  return j;
}

Json run_lil(const ExperimentConfig& c, OutputDir& out) {
  const SigmaChoice sigma = choose_sigma2(c);
  const auto ens = ensemble_for(c);
  // c = 1 as printed (limsup = sigma) and the classical c = 2.
  const auto printed = stats::qlil_envelope(ens, sigma.sigma2, 1.0);
  const auto classical = stats::qlil_envelope(ens, sigma.sigma2, 2.0);
  Csv csv{"sample", "max_printed", "min_printed", "max_classical", "min_classical"};
  for (std::size_t s = 0; s < printed.per_sample_max.size(); ++s)
    csv.cell(static_cast<std::int64_t>(s))
        .cell(printed.per_sample_max[s])
        .cell(printed.per_sample_min[s])
        .cell(classical.per_sample_max[s])
        .cell(classical.per_sample_min[s])
        .end_row();
  out.write_csv("lil.csv", csv);
  Json j = sigma_json(sigma);
  j["sigma"] = printed.sigma;
  j["printed"] = {{"median_max", printed.median_max}, {"iqr_max", printed.iqr_max}, {"median_min", printed.median_min}};
  j["classical"] = {
      {"median_max", classical.median_max}, {"iqr_max", classical.iqr_max}, {"median_min", classical.median_min}};
  out.write_json("lil.json", j);
  return j;
}

Json run_fclt(const ExperimentConfig& c, OutputDir& out) {
  const SigmaChoice sigma = choose_sigma2(c);
  const auto ens = ensemble_for(c);
  const auto& oracle = stats::brownian_oracle(c.oracle_paths, c.oracle_steps, c.oracle_seed);
  const auto r = stats::qfclt_paths(ens, sigma.sigma2, c.functional, oracle);
  const stats::Functional f = c.functional;
  const double self_test =
      numeric::ks_distance(oracle.values(f), [f](double a) { return stats::brownian_cdf(f, a); });
  Csv csv{"sample", "value"};
  for (std::size_t s = 0; s < r.values.size(); ++s) csv.cell(static_cast<std::int64_t>(s)).cell(r.values[s]).end_row();
  out.write_csv("fclt.csv", csv);
  Json j = sigma_json(sigma);
  j["functional"] = stats::functional_name(f);
  j["ks_brownian"] = r.ks_brownian;
  j["ks_exact"] = r.ks_exact;
  j["p_value"] = r.p_value;
  j["oracle_self_test"] = self_test;
  out.write_json("fclt.json", j);
  return j;
}

Json run_rate(const ExperimentConfig& c, OutputDir& out) {
  stats::RateParams params;
  params.p = c.p;
  params.D = c.D;
  params.exponential = c.exponential;
  params.a = c.a;
  params.b = c.b;
  const auto r = stats::asip_rate(params);
  Json j{{"epsilon_1", r.epsilon_1},
         {"epsilon_D", r.epsilon_D},
         {"epsilon_0_interval", Json::array({r.epsilon_0_lo, r.epsilon_0_hi})},
         {"arbitrarily_small", r.arbitrarily_small}};
  out.write_json("rate.json", j);
  return j;
}

const std::vector<std::pair<std::string, Handler>>& handlers() {
  static const std::vector<std::pair<std::string, Handler>> table = {
      {"tail", run_tail},   {"partition", run_partition}, {"density", run_density}, {"decay", run_decay},
      {"decompose", run_decompose}, {"couple", run_couple}, {"clt", run_clt},     {"lil", run_lil},
      {"fclt", run_fclt},   {"rate", run_rate},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : handlers()) out.push_back(name);
    return out;
  }();
  return names;
}

RunReport run(std::string_view subcommand, const ExperimentConfig& config, const std::filesystem::path& out_dir,
              int threads) {
  RunReport report;
  const auto it = std::find_if(handlers().begin(), handlers().end(),
                               [&](const auto& entry) { return entry.first == subcommand; });
  if (it == handlers().end()) {
    report.status = kExitConfig;
    report.message = "unknown subcommand '" + std::string(subcommand) + "'";
    return report;
  }
  try {
    validate(config);
  } catch (const ConfigError& e) {
    report.status = kExitConfig;
    report.message = e.what();
    return report;
  }

  std::optional<OutputDir> out;
  try {
    out.emplace(out_dir);
  } catch (const IoError& e) {
    report.status = kExitIo;
    report.message = e.what();
    return report;
  }

  const int previous_threads = numeric::default_threads();
  if (threads > 0) numeric::set_default_threads(threads);
  const auto start = std::chrono::steady_clock::now();
  try {
    report.summary = it->second(config, *out);
  } catch (const ConfigError& e) {
    report.status = kExitConfig;
    report.message = e.what();
  } catch (const std::invalid_argument& e) {
    report.status = kExitConfig;
    report.message = e.what();
  } catch (const IoError& e) {
    report.status = kExitIo;
    report.message = e.what();
  } catch (const NumericError& e) {
    report.status = kExitNumeric;
    report.message = e.what();
  } catch (const std::exception& e) {
    report.status = kExitNumeric;
    report.message = e.what();
  }
  numeric::set_default_threads(previous_threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json manifest;
  manifest["subcommand"] = std::string(subcommand);
  manifest["version"] = QUENCHED_VERSION;
  manifest["status"] = report.status;
  if (report.status != kExitOk) manifest["error"] = report.message;
  Json echoed = Json::object();
  for (const auto& [key, value] : echo(config)) echoed[key] = value;
  manifest["config"] = echoed;
  manifest["threads"] = threads > 0 ? threads : previous_threads;
  manifest["wall_time_seconds"] = wall;
  Json files = Json::array();
  for (const auto& f : out->files())
    files.push_back(Json{{"name", f.name}, {"bytes", f.bytes}, {"fnv1a", f.fnv1a}});
  manifest["files"] = files;
  try {
    out->write_json("manifest.json", manifest);
  } catch (const IoError& e) {
    if (report.status == kExitOk) {
      report.status = kExitIo;
      report.message = e.what();
    }
  }
  report.files = out->files();
  return report;
}

}  // namespace quenched::cli
