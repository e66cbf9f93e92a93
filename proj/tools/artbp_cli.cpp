#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "artbp/corpus.hpp"
#include "artbp/harness.hpp"

namespace {

using artbp::Json;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration (defaults if omitted)");
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--seed", c.seed, "Overrides the seed(s) of the configuration");
}

Json load(const Common& c) {
  return c.config.empty() ? Json::object() : artbp::read_json_file(c.config);
}

void report(const artbp::InfluenceBalancingResult& r) {
  for (const auto& run : r.runs) {
    const auto avg = run.trace.cumulative_average();
    std::cout << run.label << ": steps=" << run.trace.losses.size()
              << " final_cumulative_average=" << (avg.empty() ? 0.0 : avg.back())
              << (run.trace.diverged() ? " DIVERGED" : "") << '\n';
  }
}

void report(const artbp::VerificationResult& r) {
  for (const auto& c : r.checks) {
    std::cout << c.policy.describe() << ": max|z|=" << c.gradient.max_abs_z
              << (c.gradient.pass ? " pass" : " FAIL") << '\n';
    for (const auto& p : c.probes) {
      std::cout << "  probe t=" << p.timestep << ": max|z|=" << p.test.max_abs_z
                << (p.test.pass ? " pass" : " FAIL") << '\n';
    }
  }
  if (r.bias) {
    std::cout << "uncompensated " << r.bias->policy.describe()
              << ": max|z|=" << r.bias->gradient.max_abs_z
              << (r.bias_detected ? " (bias detected)" : " (bias NOT detected)") << '\n';
  }
}

void report(const artbp::CharLmResult& r) {
  std::cout << "vocabulary=" << r.vocabulary << " train_chars=" << r.train_chars << '\n';
  for (const auto& c : r.curves) {
    std::cout << to_string(c.algorithm) << " seed=" << c.seed << ":";
    for (double b : c.train_bpc) std::cout << ' ' << b;
    std::cout << (c.trace.diverged() ? " DIVERGED" : "") << '\n';
  }
}

void report(const artbp::ScheduleStatsResult& r) {
  std::cout << "draws=" << r.stats.count << " mean=" << r.stats.mean
            << " stderr=" << r.stats.stderr_mean << " variance=" << r.stats.variance
            << " max=" << r.stats.max << " nominal_mean=" << r.nominal_mean << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated and reweighted truncated backpropagation experiments"};
  app.require_subcommand(1);

  Common ib, verify, lm, stats;
  add_common(app.add_subcommand("influence-balancing", "Online training on influence balancing"), ib);
  add_common(app.add_subcommand("verify-unbiased", "Monte-Carlo unbiasedness check"), verify);
  add_common(app.add_subcommand("char-lm", "Character-level LSTM language model"), lm);
  add_common(app.add_subcommand("schedule-stats", "Truncation length statistics"), stats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  artbp::RunStatus status = artbp::RunStatus::Ok;
  try {
    if (app.got_subcommand("influence-balancing")) {
      auto config = artbp::influence_balancing_config(load(ib));
      if (ib.seed) config.seeds = {*ib.seed};
      const auto r = artbp::run_influence_balancing(config, ib.out);
      report(r);
      status = r.status;
    } else if (app.got_subcommand("verify-unbiased")) {
      auto config = artbp::verify_config(load(verify));
      if (verify.seed) config.seed = *verify.seed;
      const auto r = artbp::run_verify_unbiased(config, verify.out);
      report(r);
      status = r.status;
    } else if (app.got_subcommand("char-lm")) {
      auto config = artbp::char_lm_config(load(lm));
      if (lm.seed) config.seeds = {*lm.seed};
      const auto r = artbp::run_char_lm(config, lm.out);
      report(r);
      status = r.status;
    } else {
      auto config = artbp::schedule_stats_config(load(stats));
      if (stats.seed) config.seed = *stats.seed;
      const auto r = artbp::run_schedule_stats(config, stats.out);
      report(r);
      status = r.status;
    }
  } catch (const artbp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const artbp::CorpusError& e) {
    std::cerr << "corpus error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (status == artbp::RunStatus::VerificationFailed) std::cerr << "verification failed\n";
  if (status == artbp::RunStatus::Diverged) std::cerr << "training terminated by divergence\n";
  return artbp::exit_code(status);
}
