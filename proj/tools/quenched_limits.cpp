// quenched-limits <subcommand> --config FILE [--key value ...] --out DIR [--threads N]

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "quenched/config.hpp"
#include "quenched/runner.hpp"

namespace {

constexpr const char* kOutputs = R"(Outputs (CSV columns):
  tail       tail.csv: n,tail_estimate,std_err,n_eff         tail.json
  partition  partition.csv: seed,cell,lo,hi,R,mass,markov_ok   partition.json
  density    density.csv: bin,x,density; equivariance.csv: seed,depth,residual   density.json
  decay      decay.csv: n,decay_estimate,std_err            decay.json
  decompose  decompose.csv: bin,x,g,psi,density; sigma2.csv: seed,sigma2,residual   decompose.json
  couple     l0.csv: l,epsilon,std_err; coupling.csv: n,tail_estimate,std_err,capped_fraction   coupling.json
  clt        variance.csv: n,variance_over_n,ci_lo,ci_hi; clt.csv: sample,z   clt.json
  lil        lil.csv: sample,max_printed,min_printed,max_classical,min_classical   lil.json
  fclt       fclt.csv: sample,value                      fclt.json
  rate       rate.json
Every run also writes manifest.json. Exit status: 0 ok, 2 config, 3 numeric, 4 I/O.)";

}  // namespace

int main(int argc, char** argv) {
  using namespace quenched::cli;
  CLI::App app{"Quenched limit theorems for random LSV and doubling maps"};
  app.footer(kOutputs);
  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  app.add_option("subcommand", subcommand, "one of tail, partition, density, decay, decompose, couple, clt, lil, fclt, rate")
      ->required();
  app.add_option("--config", config_path, "key=value configuration file")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--threads", threads, "worker threads (default 1)")->check(CLI::NonNegativeNumber);
  app.allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  const std::vector<std::string> extras = app.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) {
      std::cerr << "error: unexpected argument '" << arg << "'\n";
      return kExitConfig;
    }
    const std::string body = arg.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      overrides.emplace_back(body, extras[++i]);
    } else {
      std::cerr << "error: override '" << arg << "' has no value\n";
      return kExitConfig;
    }
  }

  ExperimentConfig config;
  try {
    config = load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const RunReport report = run(subcommand, config, out_dir, threads);
  if (report.status != kExitOk) {
    std::cerr << "error: " << report.message << '\n';
    return report.status;
  }
  for (const auto& f : report.files) std::cout << f.name << "  " << f.fnv1a << '\n';
  return kExitOk;
}
