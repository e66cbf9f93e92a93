#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "artbp/montecarlo.hpp"
#include "artbp/schedule.hpp"
#include "artbp/trainer.hpp"

namespace artbp {

using Json = nlohmann::json;

/// Malformed or semantically invalid run configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"type": "fixed"|"constant_c"|"power_law"|"none", "L", "c", "alpha", "L0"};
/// only the fields of the chosen type are accepted.
SchedulePolicy policy_from_json(const Json& j);
Json policy_to_json(const SchedulePolicy& policy);

/// Shortest decimal text (at most 17 significant digits) that reads back as
/// the same double; '.' decimal point regardless of locale.
std::string format_double(double x);

/// Comma-separated rows under a fixed header; doubles go through
/// format_double. Throws if a row is ended with the wrong number of cells.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  CsvWriter& operator<<(double x);
  CsvWriter& operator<<(std::size_t x);
  CsvWriter& operator<<(const std::string& s);
  void end_row();

 private:
  void separator();
  std::ofstream out_;
  std::size_t columns_;
  std::size_t cell_ = 0;
};

enum class RunStatus { Ok, VerificationFailed, Diverged };
int exit_code(RunStatus status) noexcept;

// ---------------------------------------------------------------------------
// influence balancing

struct InfluenceBalancingConfig {
  std::size_t positive = 10;
  std::size_t negative = 13;
  double theta0 = 0.0;
  double eta0 = 3e-4;
  std::size_t steps = 20000;
  /// One deterministic truncated-BPTT run per length.
  std::vector<std::size_t> truncation_lengths{10, 100, 200};
  SchedulePolicy artbp_policy{PowerLaw{6.0, 16.0}};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct InfluenceBalancingRun {
  std::string label;
  Algorithm algorithm = Algorithm::Truncated;
  SchedulePolicy policy;
  std::uint64_t seed = 0;
  LossTrace trace;
};

struct InfluenceBalancingResult {
  std::vector<InfluenceBalancingRun> runs;
  RunStatus status = RunStatus::Ok;
};

InfluenceBalancingConfig influence_balancing_config(const Json& j);
Json to_json(const InfluenceBalancingConfig& c);
/// Writes <label>.csv (step, instantaneous_loss, cumulative_average_loss) per
/// run and summary.csv. Runs execute concurrently.
InfluenceBalancingResult run_influence_balancing(const InfluenceBalancingConfig& config,
                                                 const std::filesystem::path& out,
                                                 Execution execution = Execution::Parallel);

// ---------------------------------------------------------------------------
// unbiasedness verification

struct VerifySystemConfig {
  std::string type = "tanh_rnn";  // tanh_rnn | influence_balancing | lstm
  std::size_t inputs = 2, hidden = 4, outputs = 2;  // tanh_rnn; hidden and inputs (vocab) for lstm
  double init_scale = 0.5;
  std::size_t positive = 3, negative = 4;  // influence_balancing
  double theta = 0.1;
};

struct VerifyConfig {
  VerifySystemConfig system;
  std::size_t horizon = 12;
  std::vector<SchedulePolicy> policies{SchedulePolicy{ConstantRate{0.2}},
                                       SchedulePolicy{PowerLaw{4.0, 4.0}}};
  std::size_t samples = 200000;
  double z_threshold = 4.0;
  /// 1-based; empty means {1, T/2, T}.
  std::vector<std::size_t> probe_timesteps;
  /// Uncompensated truncated BPTT, expected to be detected as biased.
  std::optional<SchedulePolicy> bias_policy = SchedulePolicy{FixedLength{4}};
  double bias_min_z = 10.0;
  std::uint64_t seed = 1;
};

struct PolicyVerification {
  SchedulePolicy policy;
  bool compensate = true;
  ZTest gradient;
  std::vector<ProbeReport> probes;
};

struct VerificationResult {
  Vector reference;
  std::vector<PolicyVerification> checks;
  std::optional<PolicyVerification> bias;
  bool bias_detected = true;
  RunStatus status = RunStatus::Ok;
};

VerifyConfig verify_config(const Json& j);
Json to_json(const VerifyConfig& c);
/// Writes report.csv, probes.csv, bias.csv and summary.json. Fails if any
/// compensated check exceeds z_threshold or the bias check stays below
/// bias_min_z.
VerificationResult run_verify_unbiased(const VerifyConfig& config,
                                       const std::filesystem::path& out,
                                       Execution execution = Execution::Parallel);

// ---------------------------------------------------------------------------
// character-level language model

struct CorpusConfig {
  std::string path;  // one file split by ratios
  std::string train, valid, test;  // or three files
  double train_ratio = 0.9, valid_ratio = 0.05, test_ratio = 0.05;
  bool lowercase = true;
};

struct CharLmConfig {
  CorpusConfig corpus;
  std::size_t hidden = 64;
  double init_scale = 0.08;
  std::size_t lanes = 4;
  std::size_t epochs = 5;
  std::vector<std::uint64_t> seeds{1, 2};
  double learning_rate = 1e-4;
  SchedulePolicy truncated_policy{FixedLength{50}};
  SchedulePolicy artbp_policy{PowerLaw{4.0, 50.0}};
  std::vector<Algorithm> algorithms{Algorithm::Truncated, Algorithm::Artbp};
  bool independent_lane_schedules = false;
};

struct CharLmCurve {
  Algorithm algorithm = Algorithm::Truncated;
  std::uint64_t seed = 0;
  std::vector<double> train_bpc, valid_bpc;
  LossTrace trace;
};

struct CharLmResult {
  std::size_t vocabulary = 0;  // model vocabulary, including the unknown symbol
  std::size_t train_chars = 0;
  std::vector<CharLmCurve> curves;
  RunStatus status = RunStatus::Ok;
};

CharLmConfig char_lm_config(const Json& j);
Json to_json(const CharLmConfig& c);
/// Writes curves.csv (epoch, seed, algorithm, train_bpc, valid_bpc) and
/// summary.json. train_bpc is the mean training loss of the epoch in bits.
CharLmResult run_char_lm(const CharLmConfig& config, const std::filesystem::path& out,
                         Execution execution = Execution::Parallel);

/// Mean per-character loss in bits of a fixed model over tokens, from the
/// zero state.
double evaluate_bpc(const DynamicalSystem& system, std::span<const double> params,
                    const std::vector<std::uint32_t>& tokens);

// ---------------------------------------------------------------------------
// schedule statistics

struct ScheduleStatsConfig {
  SchedulePolicy policy{PowerLaw{6.0, 16.0}};
  std::size_t draws = 100000;
  std::uint64_t seed = 1;
};

struct ScheduleStatsResult {
  LengthStatistics stats;
  /// 1/c, L0 or L.
  double nominal_mean = 0.0;
  RunStatus status = RunStatus::Ok;
};

ScheduleStatsConfig schedule_stats_config(const Json& j);
Json to_json(const ScheduleStatsConfig& c);
/// Draws lengths from StreamRng(seed, 0); writes histogram.csv (length,
/// count) and summary.json.
ScheduleStatsResult run_schedule_stats(const ScheduleStatsConfig& config,
                                       const std::filesystem::path& out);

/// Reads a JSON document from disk (ConfigError on I/O or syntax errors).
Json read_json_file(const std::filesystem::path& path);

}  // namespace artbp
