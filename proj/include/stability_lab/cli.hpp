// Command-line configuration and dispatch. Kept in a header so the parsing
// and the subcommands can be driven from tests without spawning processes.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "stability_lab/anticoncentration.hpp"
#include "stability_lab/certify.hpp"
#include "stability_lab/construction.hpp"
#include "stability_lab/experiment.hpp"
#include "stability_lab/report_io.hpp"

namespace stability_lab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitViolation = 2;

/// Bad or missing configuration. `field` names the offending setting.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Command { verify_lemmas, certify, trial, estimate, sweep };
enum class OutputFormat { csv, json };

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"verify-lemmas", "certify", "trial", "estimate", "sweep"};
  return names;
}

inline std::string to_string(Command c) { return command_names()[static_cast<std::size_t>(c)]; }

inline Command parse_command(const std::string& s) {
  const auto& names = command_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<Command>(i);
  throw ConfigError("command", "unknown command '" + s + "'");
}

/// gamma expressed as a multiple of L scaled by a power of n.
struct GammaRule {
  std::string text;
  double n_exponent;  // gamma = L * n^(-n_exponent)

  static GammaRule parse(const std::string& text) {
    std::string s;
    for (char c : text)
      if (c != ' ') s += c;
    if (s == "L/sqrt(n)") return {text, 0.5};
    if (s == "L/n") return {text, 1.0};
    if (s == "L") return {text, 0.0};
    throw ConfigError("gamma-rule", "unsupported rule '" + text + "' (expected L/sqrt(n), L/n or L)");
  }

  double apply(double l, std::int64_t n) const {
    if (n_exponent == 0.5) return l / std::sqrt(static_cast<double>(n));
    return l / std::pow(static_cast<double>(n), n_exponent);
  }
};

struct RunConfig {
  Command command = Command::estimate;
  std::vector<std::int64_t> n_values;
  std::optional<double> gamma;
  std::optional<GammaRule> gamma_rule;
  std::optional<double> l;
  std::int64_t trials = 100'000;
  std::uint64_t master_seed = 42;
  std::optional<std::string> output_path;
  OutputFormat output_format = OutputFormat::csv;
  std::optional<std::string> plot;
  std::int64_t max_n = 10'000;  // verify-lemmas range

  double gamma_for(std::int64_t n) const {
    if (gamma_rule) return gamma_rule->apply(*l, n);
    return *gamma;
  }

  ConstructionParams params_for(std::int64_t n) const { return ConstructionParams::make(n, gamma_for(n), *l); }
};

inline std::vector<std::int64_t> parse_n_list(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("n", "expected a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("n", "empty list");
  return out;
}

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError("format", "expected csv or json, got '" + s + "'");
}

/// Raw settings as strings; filled from the config file first, then from
/// flags given on the command line.
struct RawSettings {
  std::optional<std::string> command, n, gamma, gamma_rule, l, trials, seed, output, format, plot, max_n;
};

namespace detail {

inline std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    std::ostringstream o;
    o.precision(17);
    o << v.get<double>();
    return o.str();
  }
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ",") + json_scalar_to_string(e);
    return s;
  }
  throw ConfigError("config", "unsupported value " + v.dump());
}

inline void load_config_file(const std::string& path, RawSettings& raw) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  const std::pair<const char*, std::optional<std::string>*> keys[] = {
      {"command", &raw.command}, {"n", &raw.n},           {"gamma", &raw.gamma}, {"gamma-rule", &raw.gamma_rule},
      {"l", &raw.l},             {"trials", &raw.trials}, {"seed", &raw.seed},   {"output", &raw.output},
      {"format", &raw.format},   {"plot", &raw.plot},     {"max-n", &raw.max_n}};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const auto& [name, slot] : keys)
      if (it.key() == name) {
        *slot = json_scalar_to_string(it.value());
        known = true;
      }
    if (!known) throw ConfigError(it.key(), "unknown configuration key");
  }
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
      v = std::stod(text, &used);
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
      v = static_cast<T>(std::stoull(text, &used));
    } else {
      v = static_cast<T>(std::stoll(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not a valid number: '" + text + "'");
  }
}

}  // namespace detail

/// Builds and validates a RunConfig from raw settings.
inline RunConfig resolve_config(const RawSettings& raw) {
  RunConfig cfg;
  if (!raw.command) throw ConfigError("command", "missing (one of verify-lemmas, certify, trial, estimate, sweep)");
  cfg.command = parse_command(*raw.command);
  if (raw.n) cfg.n_values = parse_n_list(*raw.n);
  if (raw.gamma_rule) cfg.gamma_rule = GammaRule::parse(*raw.gamma_rule);
  else if (raw.gamma) cfg.gamma = detail::parse_number<double>("gamma", *raw.gamma);
  if (raw.l) cfg.l = detail::parse_number<double>("l", *raw.l);
  if (raw.trials) cfg.trials = detail::parse_number<std::int64_t>("trials", *raw.trials);
  if (raw.seed) cfg.master_seed = detail::parse_number<std::uint64_t>("seed", *raw.seed);
  if (raw.output) cfg.output_path = *raw.output;
  if (raw.format) cfg.output_format = parse_format(*raw.format);
  if (raw.plot) cfg.plot = *raw.plot;
  if (raw.max_n) cfg.max_n = detail::parse_number<std::int64_t>("max-n", *raw.max_n);

  if (cfg.trials < 1) throw ConfigError("trials", "must be positive");
  if (cfg.max_n < 1 || cfg.max_n > kRademacherExactMaxN) throw ConfigError("max-n", "must lie in [1, 1000000]");
  if (cfg.command == Command::verify_lemmas) return cfg;

  if (cfg.n_values.empty()) throw ConfigError("n", "required for " + to_string(cfg.command));
  if (!cfg.l) throw ConfigError("l", "required for " + to_string(cfg.command));
  if (!cfg.gamma && !cfg.gamma_rule) throw ConfigError("gamma", "one of --gamma or --gamma-rule is required");
  if (!(*cfg.l > 0.0) || !std::isfinite(*cfg.l)) throw ConfigError("l", "must be positive");
  for (const auto n : cfg.n_values) {
    const double g = cfg.gamma_for(n);
    if (!(g > 0.0) || !(g <= *cfg.l))
      throw ConfigError("gamma", "stability target must satisfy 0 < gamma <= l (got gamma=" + io::fmt_real(g) +
                                     ", l=" + io::fmt_real(*cfg.l) + " at n=" + std::to_string(n) + ")");
  }
  if ((cfg.command == Command::estimate || cfg.command == Command::sweep) && cfg.trials < 1000)
    throw ConfigError("trials", "estimate and sweep need at least 1000 trials");
  return cfg;
}

/// Result of parsing argv: either a config or an early exit (help, usage error).
struct ParseOutcome {
  std::optional<RunConfig> config;
  int exit_code = kExitOk;
  std::string message;
};

inline ParseOutcome parse_config(int argc, const char* const* argv) {
  CLI::App app{"Uniform-stability lower-bound laboratory", "stability_lab"};
  std::string command, config_path;
  RawSettings flags;
  std::string n, gamma, gamma_rule, l, trials, seed, output, format, plot, max_n;

  app.add_option("command", command, "verify-lemmas | certify | trial | estimate | sweep");
  app.add_option("--config", config_path, "flat JSON file whose keys mirror the flags");
  auto* o_n = app.add_option("--n", n, "sample size(s), comma separated");
  auto* o_gamma = app.add_option("--gamma", gamma, "stability target gamma");
  auto* o_rule = app.add_option("--gamma-rule", gamma_rule, "gamma as a function of n: L/sqrt(n), L/n or L");
  auto* o_l = app.add_option("--l", l, "loss bound L");
  auto* o_trials = app.add_option("--trials", trials, "Monte Carlo trials (default 100000)");
  auto* o_seed = app.add_option("--seed", seed, "master seed (default 42); trial seed for 'trial'");
  auto* o_output = app.add_option("--output", output, "output file (default stdout)");
  auto* o_format = app.add_option("--format", format, "csv or json (default csv)");
  auto* o_plot = app.add_option("--plot", plot, "SVG path for sweep plots");
  auto* o_max_n = app.add_option("--max-n", max_n, "largest n for verify-lemmas (default 10000)");

  ParseOutcome outcome;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    outcome.exit_code = e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    if (e.get_exit_code() == 0) msg << app.help();
    else msg << e.what() << "\n" << app.help();
    outcome.message = msg.str();
    return outcome;
  }

  try {
    RawSettings raw;
    if (!config_path.empty()) detail::load_config_file(config_path, raw);
    if (!command.empty()) raw.command = command;
    auto take = [](CLI::Option* opt, const std::string& value, std::optional<std::string>& slot) {
      if (opt->count() > 0) slot = value;
    };
    take(o_n, n, raw.n);
    take(o_l, l, raw.l);
    take(o_trials, trials, raw.trials);
    take(o_seed, seed, raw.seed);
    take(o_output, output, raw.output);
    take(o_format, format, raw.format);
    take(o_plot, plot, raw.plot);
    take(o_max_n, max_n, raw.max_n);
    // An explicit gamma flag replaces any gamma setting from the file, and vice versa.
    if (o_gamma->count() > 0) {
      raw.gamma = gamma;
      raw.gamma_rule.reset();
    }
    if (o_rule->count() > 0) {
      raw.gamma_rule = gamma_rule;
      if (o_gamma->count() == 0) raw.gamma.reset();
    }
    if (o_gamma->count() > 0 && o_rule->count() > 0)
      throw ConfigError("gamma", "--gamma and --gamma-rule are mutually exclusive");
    outcome.config = resolve_config(raw);
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitUsage;
    outcome.message = std::string("error: ") + e.what() + "\nRun with --help for usage.\n";
  }
  return outcome;
}

/// Command line that reproduces `cfg` (output paths omitted).
inline std::string reproduction_command(const RunConfig& cfg) {
  std::ostringstream cmd;
  cmd << "stability_lab " << to_string(cfg.command);
  if (!cfg.n_values.empty()) {
    cmd << " --n ";
    for (std::size_t i = 0; i < cfg.n_values.size(); ++i) cmd << (i ? "," : "") << cfg.n_values[i];
  }
  if (cfg.gamma_rule) cmd << " --gamma-rule '" << cfg.gamma_rule->text << "'";
  else if (cfg.gamma) cmd << " --gamma " << io::fmt_real(*cfg.gamma);
  if (cfg.l) cmd << " --l " << io::fmt_real(*cfg.l);
  if (cfg.command == Command::verify_lemmas) cmd << " --max-n " << cfg.max_n;
  else if (cfg.command != Command::trial) cmd << " --trials " << cfg.trials;
  cmd << " --seed " << cfg.master_seed;
  return cmd.str();
}

/// A violated guarantee together with the configuration that replays it.
class ReproducibleFailure : public std::runtime_error {
 public:
  ReproducibleFailure(const std::string& what, RunConfig repro) : std::runtime_error(what), repro_(std::move(repro)) {}
  const RunConfig& repro() const noexcept { return repro_; }

 private:
  RunConfig repro_;
};

namespace detail {

inline std::string render(const io::Table& t, OutputFormat f) { return f == OutputFormat::csv ? io::to_csv(t) : io::to_json(t); }

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.output_path) io::write_atomic(*cfg.output_path, text);
  else out << text;
}

inline std::string yes_no(bool b) { return b ? "true" : "false"; }

/// Checks of the two anti-concentration lemmas; returns false if any fails.
inline bool run_verify_lemmas(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  io::Table t{{"check", "n", "value", "bound", "holds"}, {}};
  bool ok = true;

  double min_tail = 2.0;
  std::int64_t argmin = 0;
  std::int64_t failures = 0;
  for (std::int64_t n = 1; n <= cfg.max_n; ++n) {
    const TailReport r = rademacher_tail_exact(n);
    if (r.exact_tail < min_tail) {
      min_tail = r.exact_tail;
      argmin = n;
    }
    if (!r.satisfied) {
      ++failures;
      err << "rademacher tail below 3/32 at n=" << n << ": " << io::fmt_real(r.exact_tail) << "\n";
    }
  }
  t.add({"rademacher_tail_min", std::to_string(argmin), io::fmt_real(min_tail), io::fmt_real(kRademacherTailBound),
         yes_no(failures == 0)});
  ok = ok && failures == 0;

  double worst_diff = 0.0;
  std::int64_t worst_n = 1;
  const std::int64_t enum_max = std::min<std::int64_t>(20, cfg.max_n);
  for (std::int64_t n = 1; n <= enum_max; ++n) {
    const double diff = std::abs(rademacher_tail_exact(n).exact_tail - rademacher_tail_by_enumeration(n));
    if (diff > worst_diff) {
      worst_diff = diff;
      worst_n = n;
    }
  }
  t.add({"rademacher_tail_vs_enumeration", std::to_string(worst_n), io::fmt_real(worst_diff), io::fmt_real(1e-12),
         yes_no(worst_diff <= 1e-12)});
  ok = ok && worst_diff <= 1e-12;

  // Paley-Zygmund on the exact law of S^2 at theta = 1/4: the step that
  // turns the moments of S into P(S^2 > n/4) >= 3/16.
  double worst_slack = INFINITY;
  std::int64_t slack_n = 1;
  bool pz_ok = true;
  const std::int64_t pz_max = std::min<std::int64_t>(64, cfg.max_n);
  for (std::int64_t n = 1; n <= pz_max; ++n) {
    std::vector<DiscreteDistribution::Atom> atoms;
    double binom = 1.0;
    for (std::int64_t k = 0; k <= n; ++k) {
      const double s = static_cast<double>(2 * k - n);
      atoms.push_back({s * s, binom * std::ldexp(1.0, -static_cast<int>(n))});
      binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    const PaleyZygmundCheck c = verify_paley_zygmund(DiscreteDistribution(atoms), 0.25);
    pz_ok = pz_ok && c.holds && c.bound >= 3.0 / 16.0 - 1e-12;
    if (c.tail - c.bound < worst_slack) {
      worst_slack = c.tail - c.bound;
      slack_n = n;
    }
  }
  t.add({"paley_zygmund_square_sum_min_slack", std::to_string(slack_n), io::fmt_real(worst_slack), "0", yes_no(pz_ok)});
  ok = ok && pz_ok;

  emit(cfg, render(t, cfg.output_format), out);
  return ok;
}

inline bool run_certify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  io::Table t{{"n", "gamma", "l", "mode", "supremum", "stability_bound", "budget", "stability_holds", "attains_bound",
               "max_loss", "loss_bound", "boundedness_holds"},
              {}};
  bool ok = true;
  for (const auto n : cfg.n_values) {
    const ConstructionParams params = cfg.params_for(n);
    StabilityCertificate cert;
    if (exhaustive_tuple_count(params) <= kMaxExhaustiveTuples) {
      cert = certify_stability_exhaustive(params);
    } else {
      RandomStream rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(n)));
      cert = certify_stability_random(params, cfg.trials, rng);
    }
    const BoundednessCertificate bounded = certify_boundedness(params);
    const bool stable = cert.supremum_found <= params.gamma_target() + 1e-12;
    const bool attains = std::abs(cert.supremum_found - params.gamma_target()) <= 1e-12;
    if (!stable) err << "stability certificate " << io::fmt_real(cert.supremum_found) << " exceeds gamma at n=" << n << "\n";
    if (!bounded.holds) err << "loss bound violated at n=" << n << "\n";
    ok = ok && stable && bounded.holds;
    t.add({std::to_string(n), io::fmt_real(params.gamma_target()), io::fmt_real(params.l_target()), to_string(cert.mode),
           io::fmt_real(cert.supremum_found), io::fmt_real(params.gamma_target()), std::to_string(cert.budget_inspected),
           yes_no(stable), yes_no(attains), io::fmt_real(bounded.max_loss), io::fmt_real(bounded.bound),
           yes_no(bounded.holds)});
  }
  emit(cfg, render(t, cfg.output_format), out);
  return ok;
}

inline void run_single_trial(const RunConfig& cfg, std::ostream& out) {
  const std::int64_t n = cfg.n_values.front();
  const ConstructionParams params = cfg.params_for(n);
  const TrialResult r = run_trial_seeded(params, cfg.master_seed);
  io::Table t{{"n", "gamma", "l", "seed", "population", "empirical", "gap", "threshold", "e1", "e2", "gap_event",
               "sigma_sum"},
              {}};
  t.add({std::to_string(n), io::fmt_real(params.gamma_target()), io::fmt_real(params.l_target()),
         std::to_string(r.seed), io::fmt_real(r.population), io::fmt_real(r.empirical), io::fmt_real(r.gap),
         io::fmt_real(gap_threshold(params)), yes_no(r.e1), yes_no(r.e2), yes_no(r.gap_event),
         std::to_string(r.sigma_sum)});
  emit(cfg, render(t, cfg.output_format), out);
}

inline void run_estimates(const RunConfig& cfg, std::ostream& out) {
  std::vector<ExperimentReport> reports;
  const std::size_t count = cfg.command == Command::estimate ? 1 : cfg.n_values.size();
  for (std::size_t i = 0; i < count; ++i) {
    const std::int64_t n = cfg.n_values[i];
    try {
      reports.push_back(estimate_probabilities(cfg.params_for(n), cfg.trials, cfg.master_seed));
    } catch (const InvariantViolation& e) {
      RunConfig repro = cfg;
      repro.command = Command::trial;
      repro.n_values = {n};
      repro.master_seed = e.seed();
      throw ReproducibleFailure(e.what(), std::move(repro));
    }
  }
  emit(cfg, render(io::estimate_table(reports), cfg.output_format), out);
  if (cfg.plot) io::write_atomic(*cfg.plot, io::render_sweep_svg(reports));
}

}  // namespace detail

/// Executes a validated configuration. Exit code 0 when every checked
/// guarantee holds, 2 (with a reproduction command on `err`) otherwise.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    bool ok = true;
    switch (cfg.command) {
      case Command::verify_lemmas: ok = detail::run_verify_lemmas(cfg, out, err); break;
      case Command::certify: ok = detail::run_certify(cfg, out, err); break;
      case Command::trial: detail::run_single_trial(cfg, out); break;
      case Command::estimate:
      case Command::sweep: detail::run_estimates(cfg, out); break;
    }
    if (!ok) {
      err << "guarantee violated; reproduce with: " << reproduction_command(cfg) << "\n";
      return kExitViolation;
    }
    return kExitOk;
  } catch (const ReproducibleFailure& e) {
    err << "guarantee violated: " << e.what() << "\nreproduce with: " << reproduction_command(e.repro()) << "\n";
    return kExitViolation;
  } catch (const InvariantViolation& e) {
    RunConfig repro = cfg;
    repro.command = Command::trial;
    repro.n_values.resize(1);
    repro.master_seed = e.seed();
    err << "guarantee violated: " << e.what() << "\nreproduce with: " << reproduction_command(repro) << "\n";
    return kExitViolation;
  }
}

}  // namespace stability_lab::cli
