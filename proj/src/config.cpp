#include "quenched/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "quenched/omega.hpp"

namespace quenched::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(value) + "' is not " + std::string(expected));
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || std::isnan(out)) bad(key, v, "a number");
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec == std::errc() && ptr == v.data() + v.size()) return out;
  // Accept integral values in float notation such as 1e6.
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::fabs(d) > 9.0e18) bad(key, v, "an integer");
  return static_cast<std::int64_t>(d);
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

int to_int32(std::string_view key, std::string_view v) {
  const std::int64_t x = to_int(key, v);
  if (x < -2147483647 || x > 2147483647) bad(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  bad(key, v, "a boolean");
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  const char* key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define QL_DOUBLE(name) \
  Entry { #name, [](ExperimentConfig& c, std::string_view v) { c.name = to_double(#name, v); }, \
          [](const ExperimentConfig& c) { return fmt(c.name); } }
#define QL_INT(name) \
  Entry { #name, [](ExperimentConfig& c, std::string_view v) { c.name = to_int(#name, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.name); } }
#define QL_INT32(name) \
  Entry { #name, [](ExperimentConfig& c, std::string_view v) { c.name = to_int32(#name, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.name); } }
#define QL_UINT(name) \
  Entry { #name, [](ExperimentConfig& c, std::string_view v) { c.name = to_uint(#name, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.name); } }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      Entry{"family",
            [](ExperimentConfig& c, std::string_view v) {
              try {
                c.family = parse_family(v);
              } catch (const std::invalid_argument&) {
                bad("family", v, "one of lsv, doubling");
              }
            },
            [](const ExperimentConfig& c) { return std::string(family_name(c.family)); }},
      QL_DOUBLE(alpha_min),
      QL_DOUBLE(alpha_max),
      QL_UINT(master_seed),
      QL_INT(n_seeds),
      QL_INT32(n_bins),
      QL_INT32(pullback_depth),
      QL_INT32(subsamples),
      QL_INT32(K_trunc),
      Entry{"observable", [](ExperimentConfig& c, std::string_view v) { c.observable = std::string(v); },
            [](const ExperimentConfig& c) { return c.observable; }},
      QL_DOUBLE(gamma),
      QL_INT(n_steps),
      QL_INT(n_samples),
      Entry{"sampling",
            [](ExperimentConfig& c, std::string_view v) {
              if (v == "equivariant")
                c.sampling = stats::Sampling::equivariant;
              else if (v == "lebesgue")
                c.sampling = stats::Sampling::lebesgue;
              else
                bad("sampling", v, "one of equivariant, lebesgue");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.sampling == stats::Sampling::equivariant ? "equivariant" : "lebesgue");
            }},
      QL_UINT(sample_seed),
      QL_INT32(bootstrap),
      QL_DOUBLE(ci_level),
      QL_DOUBLE(sigma2),
      QL_DOUBLE(ks_threshold),
      QL_INT(tail_n_max),
      QL_INT(samples_per_omega),
      QL_DOUBLE(fit_lo),
      QL_DOUBLE(fit_hi),
      QL_INT(depth_cap),
      QL_DOUBLE(refine_tol),
      QL_DOUBLE(mass_floor),
      QL_INT(pair_samples),
      QL_INT(decay_n_max),
      QL_INT(l0),
      QL_INT(l_max),
      QL_DOUBLE(alpha_exp),
      QL_INT(couple_n_max),
      QL_INT(couple_pairs),
      Entry{"functional",
            [](ExperimentConfig& c, std::string_view v) {
              try {
                c.functional = stats::parse_functional(v);
              } catch (const std::invalid_argument&) {
                bad("functional", v, "one of sup, sup_abs, terminal");
              }
            },
            [](const ExperimentConfig& c) { return std::string(stats::functional_name(c.functional)); }},
      QL_INT(oracle_paths),
      QL_INT(oracle_steps),
      QL_UINT(oracle_seed),
      QL_DOUBLE(p),
      QL_DOUBLE(D),
      Entry{"exponential", [](ExperimentConfig& c, std::string_view v) { c.exponential = to_bool("exponential", v); },
            [](const ExperimentConfig& c) { return std::string(c.exponential ? "true" : "false"); }},
      QL_DOUBLE(a),
      QL_DOUBLE(b),
  };
  return entries;
}

#undef QL_DOUBLE
#undef QL_INT
#undef QL_INT32
#undef QL_UINT

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (std::int64_t i = 0; i < n_seeds; ++i) out.push_back(master_seed + static_cast<std::uint64_t>(i));
  return out;
}

maps::Observable ExperimentConfig::phi() const {
  try {
    return maps::Observable::by_name(observable, gamma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void set_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const Entry& e : table()) {
    if (key == e.key) {
      e.set(config, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

void validate(const ExperimentConfig& c) {
  require(c.alpha_min <= c.alpha_max, "alpha_min must not exceed alpha_max");
  try {
    omega::validate_bounds(c.family, c.bounds());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  (void)c.phi();
  require(c.n_seeds >= 1 && c.n_seeds <= 100000, "n_seeds must lie in [1, 100000]");
  require(c.n_bins >= 2 && c.n_bins <= (1 << 20), "n_bins must lie in [2, 2^20]");
  require(c.pullback_depth >= 0 && c.pullback_depth <= 4096, "pullback_depth must lie in [0, 4096]");
  require(c.subsamples >= 1 && c.subsamples <= 4096, "subsamples must lie in [1, 4096]");
  require(c.K_trunc >= 1 && c.K_trunc <= 4096, "K_trunc must lie in [1, 4096]");
  require(c.n_steps >= 1, "n_steps must be >= 1");
  require(c.n_samples >= 2, "n_samples must be >= 2");
  require(c.bootstrap >= 0, "bootstrap must be >= 0");
  require(c.ci_level > 0.0 && c.ci_level < 1.0, "ci_level must lie in (0, 1)");
  require(c.sigma2 >= 0.0, "sigma2 must be >= 0");
  require(c.ks_threshold > 0.0 && c.ks_threshold <= 1.0, "ks_threshold must lie in (0, 1]");
  require(c.tail_n_max >= 1, "tail_n_max must be >= 1");
  require(c.samples_per_omega >= 1, "samples_per_omega must be >= 1");
  require(c.fit_lo >= 1.0 && c.fit_lo < c.fit_hi, "need 1 <= fit_lo < fit_hi");
  require(c.depth_cap >= 1, "depth_cap must be >= 1");
  require(c.refine_tol > 0.0 && c.refine_tol < 1.0, "refine_tol must lie in (0, 1)");
  require(c.mass_floor >= 0.0 && c.mass_floor < 1.0, "mass_floor must lie in [0, 1)");
  require(c.pair_samples >= 1, "pair_samples must be >= 1");
  require(c.decay_n_max >= 1, "decay_n_max must be >= 1");
  require(c.l0 >= 0, "l0 must be >= 0");
  require(c.l_max >= 1, "l_max must be >= 1");
  require(c.alpha_exp > 0.0 && c.alpha_exp < 1.0, "alpha_exp must lie in (0, 1)");
  require(c.couple_n_max >= 1, "couple_n_max must be >= 1");
  require(c.couple_pairs >= 1, "couple_pairs must be >= 1");
  require(c.oracle_paths >= 2 && c.oracle_steps >= 1, "oracle_paths must be >= 2 and oracle_steps >= 1");
}

ExperimentConfig parse_config(std::string_view text, const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(number) + " is not key = value: '" + body + "'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(number) + " has an empty key");
    set_value(config, key, value);
  }
  for (const auto& [key, value] : overrides) set_value(config, key, value);
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> echo(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Entry& e : table()) out.emplace_back(e.key, e.get(config));
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const Entry& e : table()) out.emplace_back(e.key);
  return out;
}

}  // namespace quenched::cli
