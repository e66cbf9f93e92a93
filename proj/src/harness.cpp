#include "artbp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "artbp/corpus.hpp"
#include "artbp/gradients.hpp"
#include "artbp/models.hpp"
#include "artbp/trajectory.hpp"
#include "parallel_for.hpp"

namespace artbp {
namespace fs = std::filesystem;

namespace {

/// Schedule streams are keyed apart from the model/data streams of the same
/// seed, which use StreamRng(seed, 0) and StreamRng(seed, 1).
constexpr std::uint64_t kScheduleSeedOffset = 1ULL << 32;
std::uint64_t schedule_seed(std::uint64_t seed) { return seed + kScheduleSeedOffset; }

/// Strict view of a JSON object: every key must be consumed before finish().
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    const Json* v = find(key);
    if (!v) return fallback;
    return convert<T>(*v, key);
  }

  double real(const std::string& key, double fallback) {
    const Json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const Json* v = find(key);
    if (!v) return fallback;
    return to_count(*v, key);
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
    const Json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(key, "expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (const auto& e : *v) out.push_back(to_count(e, key));
    return out;
  }

  std::vector<std::uint64_t> seeds(const std::string& key, std::vector<std::uint64_t> fallback) {
    auto c = counts(key, {});
    if (!has(key)) return fallback;
    return {c.begin(), c.end()};
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError(where_ + "." + key + ": " + why);
  }

  const std::string& where() const { return where_; }

 private:
  template <class T>
  T convert(const Json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    return v.get<T>();
  }

  std::size_t to_count(const Json& v, const std::string& key) const {
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return v.get<std::size_t>();
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

void check_experiment(Reader& r, const std::string& kind) {
  const auto name = r.get<std::string>("experiment", kind);
  if (name != kind) r.fail("experiment", "expected \"" + kind + "\", got \"" + name + "\"");
}

SchedulePolicy policy_at(Reader& r, const std::string& key, SchedulePolicy fallback) {
  const Json* v = r.find(key);
  if (!v) return fallback;
  try {
    return policy_from_json(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(r.where() + "." + key + ": " + e.what());
  }
}

std::vector<SchedulePolicy> policies_at(Reader& r, const std::string& key,
                                        std::vector<SchedulePolicy> fallback) {
  const Json* v = r.find(key);
  if (!v) return fallback;
  if (!v->is_array()) r.fail(key, "expected an array of policies");
  std::vector<SchedulePolicy> out;
  for (const auto& e : *v) {
    try {
      out.push_back(policy_from_json(e));
    } catch (const ConfigError& err) {
      throw ConfigError(r.where() + "." + key + ": " + err.what());
    }
  }
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void prepare_output(const fs::path& out, const Json& config) {
  fs::create_directories(out);
  write_json(out / "config.json", config);
}

double nominal_mean(const SchedulePolicy& policy) {
  return std::visit(
      [](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FixedLength>) return static_cast<double>(p.length);
        else if constexpr (std::is_same_v<P, ConstantRate>) return 1.0 / p.c;
        else if constexpr (std::is_same_v<P, PowerLaw>) return p.mean_length;
        else return std::numeric_limits<double>::infinity();
      },
      policy.variant());
}

Json divergence_json(const LossTrace& trace) {
  if (!trace.divergence) return nullptr;
  return {{"timestep", trace.divergence->timestep},
          {"epoch", trace.divergence->epoch},
          {"message", trace.divergence->message}};
}

}  // namespace

// ---------------------------------------------------------------------------
// policies, CSV

SchedulePolicy policy_from_json(const Json& j) {
  Reader r(j, "policy");
  const auto type = r.get<std::string>("type", "");
  try {
    SchedulePolicy policy;
    if (type == "fixed") {
      const std::size_t length = r.count("L", 0);
      if (!r.has("L")) r.fail("L", "required for a fixed policy");
      policy = SchedulePolicy{FixedLength{length}};
    } else if (type == "constant_c") {
      if (!r.has("c")) r.fail("c", "required for a constant_c policy");
      policy = SchedulePolicy{ConstantRate{r.real("c", 0.0)}};
    } else if (type == "power_law") {
      if (!r.has("alpha") || !r.has("L0")) r.fail("alpha", "power_law needs alpha and L0");
      const double alpha = r.real("alpha", 0.0);
      policy = SchedulePolicy{PowerLaw{alpha, r.real("L0", 0.0)}};
    } else if (type == "none") {
      policy = SchedulePolicy{NeverTruncate{}};
    } else {
      r.fail("type", "expected fixed, constant_c, power_law or none");
    }
    r.finish();
    return policy;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

Json policy_to_json(const SchedulePolicy& policy) {
  return std::visit(
      [](const auto& p) -> Json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FixedLength>) return {{"type", "fixed"}, {"L", p.length}};
        else if constexpr (std::is_same_v<P, ConstantRate>) return {{"type", "constant_c"}, {"c", p.c}};
        else if constexpr (std::is_same_v<P, PowerLaw>)
          return {{"type", "power_law"}, {"alpha", p.alpha}, {"L0", p.mean_length}};
        else return {{"type", "none"}};
      },
      policy.variant());
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  for (const auto& h : header) *this << h;
  end_row();
}

void CsvWriter::separator() {
  if (cell_++ > 0) out_ << ',';
}

CsvWriter& CsvWriter::operator<<(double x) {
  separator();
  out_ << format_double(x);
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::size_t x) {
  separator();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& s) {
  separator();
  out_ << s;
  return *this;
}

void CsvWriter::end_row() {
  if (cell_ != columns_) {
    throw std::logic_error("CSV row has " + std::to_string(cell_) + " cells, expected " +
                           std::to_string(columns_));
  }
  out_ << '\n';
  cell_ = 0;
}

int exit_code(RunStatus status) noexcept {
  switch (status) {
    case RunStatus::Ok: return 0;
    case RunStatus::VerificationFailed: return 2;
    case RunStatus::Diverged: return 3;
  }
  return 2;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// influence balancing

InfluenceBalancingConfig influence_balancing_config(const Json& j) {
  Reader r(j, "influence-balancing");
  check_experiment(r, "influence-balancing");
  InfluenceBalancingConfig c;
  c.positive = r.count("positive", c.positive);
  c.negative = r.count("negative", c.negative);
  c.theta0 = r.real("theta0", c.theta0);
  c.eta0 = r.real("eta0", c.eta0);
  c.steps = r.count("steps", c.steps);
  c.truncation_lengths = r.counts("truncation_lengths", c.truncation_lengths);
  c.artbp_policy = policy_at(r, "artbp_policy", c.artbp_policy);
  c.seeds = r.seeds("seeds", c.seeds);
  r.finish();
  if (c.positive == 0 || c.negative == 0) throw ConfigError("positive and negative must be >= 1");
  if (c.eta0 < 0.0) throw ConfigError("eta0 must be >= 0");
  for (std::size_t L : c.truncation_lengths) {
    if (L == 0) throw ConfigError("truncation lengths must be >= 1");
  }
  return c;
}

Json to_json(const InfluenceBalancingConfig& c) {
  return {{"experiment", "influence-balancing"},
          {"positive", c.positive},
          {"negative", c.negative},
          {"theta0", c.theta0},
          {"eta0", c.eta0},
          {"steps", c.steps},
          {"truncation_lengths", c.truncation_lengths},
          {"artbp_policy", policy_to_json(c.artbp_policy)},
          {"seeds", c.seeds}};
}

InfluenceBalancingResult run_influence_balancing(const InfluenceBalancingConfig& config,
                                                 const fs::path& out, Execution execution) {
  prepare_output(out, to_json(config));
  const auto system = build_influence_balancing(config.positive, config.negative, config.theta0);

  InfluenceBalancingResult result;
  for (std::size_t L : config.truncation_lengths) {
    result.runs.push_back({"truncated_L" + std::to_string(L), Algorithm::Truncated,
                           SchedulePolicy{FixedLength{L}}, 0, {}});
  }
  for (std::uint64_t seed : config.seeds) {
    result.runs.push_back({"artbp_seed" + std::to_string(seed), Algorithm::Artbp,
                           config.artbp_policy, seed, {}});
  }

  const std::vector<Observation> stream(config.steps, InfluenceBalancingSystem::observation());
  detail::parallel_for(result.runs.size(), execution, [&](std::size_t k) {
    auto& run = result.runs[k];
    ParameterVector params = system.initial_parameters();
    Optimizer opt = Sgd(config.eta0);
    if (config.steps > 0) {
      run.trace = train_online(system, params, stream, run.policy, run.algorithm, opt,
                               config.steps, schedule_seed(run.seed));
    }
    CsvWriter csv(out / (run.label + ".csv"),
                  {"step", "instantaneous_loss", "cumulative_average_loss"});
    const auto avg = run.trace.cumulative_average();
    for (std::size_t t = 0; t < avg.size(); ++t) {
      csv << t + 1 << run.trace.losses[t] << avg[t];
      csv.end_row();
    }
  });

  CsvWriter summary(out / "summary.csv",
                    {"label", "algorithm", "policy", "seed", "steps_completed", "initial_loss",
                     "final_cumulative_average", "diverged"});
  for (const auto& run : result.runs) {
    const auto avg = run.trace.cumulative_average();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    summary << run.label << to_string(run.algorithm) << run.policy.describe()
            << static_cast<std::size_t>(run.seed) << run.trace.losses.size()
            << (run.trace.losses.empty() ? nan : run.trace.losses.front())
            << (avg.empty() ? nan : avg.back())
            << std::string(run.trace.diverged() ? "true" : "false");
    summary.end_row();
    if (run.trace.diverged()) result.status = RunStatus::Diverged;
  }
  return result;
}

// ---------------------------------------------------------------------------
// unbiasedness verification

VerifyConfig verify_config(const Json& j) {
  Reader r(j, "verify-unbiased");
  check_experiment(r, "verify-unbiased");
  VerifyConfig c;
  if (const Json* s = r.find("system")) {
    Reader sr(*s, "verify-unbiased.system");
    auto& sys = c.system;
    sys.type = sr.get<std::string>("type", sys.type);
    if (sys.type == "tanh_rnn") {
      sys.inputs = sr.count("inputs", sys.inputs);
      sys.hidden = sr.count("hidden", sys.hidden);
      sys.outputs = sr.count("outputs", sys.outputs);
      sys.init_scale = sr.real("init_scale", sys.init_scale);
    } else if (sys.type == "lstm") {
      sys.inputs = sr.count("vocab", 3);
      sys.hidden = sr.count("hidden", 2);
      sys.init_scale = sr.real("init_scale", sys.init_scale);
    } else if (sys.type == "influence_balancing") {
      sys.positive = sr.count("positive", sys.positive);
      sys.negative = sr.count("negative", sys.negative);
      sys.theta = sr.real("theta", sys.theta);
    } else {
      sr.fail("type", "expected tanh_rnn, influence_balancing or lstm");
    }
    sr.finish();
  }
  c.horizon = r.count("horizon", c.horizon);
  c.policies = policies_at(r, "policies", c.policies);
  c.samples = r.count("samples", c.samples);
  c.z_threshold = r.real("z_threshold", c.z_threshold);
  c.probe_timesteps = r.counts("probe_timesteps", c.probe_timesteps);
  if (const Json* b = r.find("bias_policy")) {
    if (b->is_null()) {
      c.bias_policy.reset();
    } else {
      try {
        c.bias_policy = policy_from_json(*b);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("verify-unbiased.bias_policy: ") + e.what());
      }
    }
  }
  c.bias_min_z = r.real("bias_min_z", c.bias_min_z);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  r.finish();
  if (c.horizon == 0) throw ConfigError("horizon must be >= 1");
  if (c.samples < 2) throw ConfigError("samples must be >= 2");
  if (!(c.z_threshold > 0.0)) throw ConfigError("z_threshold must be positive");
  for (std::size_t t : c.probe_timesteps) {
    if (t == 0 || t > c.horizon) throw ConfigError("probe timesteps must lie in [1, horizon]");
  }
  return c;
}

Json to_json(const VerifyConfig& c) {
  Json sys = {{"type", c.system.type}};
  if (c.system.type == "tanh_rnn") {
    sys.update({{"inputs", c.system.inputs},
                {"hidden", c.system.hidden},
                {"outputs", c.system.outputs},
                {"init_scale", c.system.init_scale}});
  } else if (c.system.type == "lstm") {
    sys.update({{"vocab", c.system.inputs},
                {"hidden", c.system.hidden},
                {"init_scale", c.system.init_scale}});
  } else {
    sys.update({{"positive", c.system.positive},
                {"negative", c.system.negative},
                {"theta", c.system.theta}});
  }
  Json policies = Json::array();
  for (const auto& p : c.policies) policies.push_back(policy_to_json(p));
  return {{"experiment", "verify-unbiased"},
          {"system", sys},
          {"horizon", c.horizon},
          {"policies", policies},
          {"samples", c.samples},
          {"z_threshold", c.z_threshold},
          {"probe_timesteps", c.probe_timesteps},
          {"bias_policy", c.bias_policy ? policy_to_json(*c.bias_policy) : Json(nullptr)},
          {"bias_min_z", c.bias_min_z},
          {"seed", c.seed}};
}

namespace {

struct VerifySetup {
  std::unique_ptr<DynamicalSystem> system;
  ParameterVector params;
  std::vector<Observation> observations;
};

VerifySetup make_verify_setup(const VerifyConfig& c) {
  VerifySetup s;
  StreamRng data(c.seed, 1);
  const auto& sys = c.system;
  if (sys.type == "tanh_rnn") {
    auto rnn = std::make_unique<TanhRnnSystem>(
        build_tanh_rnn(sys.inputs, sys.hidden, sys.outputs, sys.init_scale, c.seed));
    for (std::size_t t = 0; t < c.horizon; ++t) {
      Vector x(sys.inputs), y(sys.outputs);
      for (double& v : x) v = data.uniform(-1.0, 1.0);
      for (double& v : y) v = data.uniform(-1.0, 1.0);
      s.observations.push_back({std::move(x), std::move(y)});
    }
    s.params = rnn->initial_parameters();
    s.system = std::move(rnn);
  } else if (sys.type == "lstm") {
    auto lstm = std::make_unique<LstmCharSystem>(
        build_lstm_char(sys.inputs, sys.hidden, c.seed, sys.init_scale));
    for (std::size_t t = 0; t < c.horizon; ++t) {
      const auto x = static_cast<std::uint32_t>(data() % sys.inputs);
      const auto y = static_cast<std::uint32_t>(data() % sys.inputs);
      s.observations.push_back({Token{x}, Token{y}});
    }
    s.params = lstm->initial_parameters();
    s.system = std::move(lstm);
  } else {
    auto ib = std::make_unique<InfluenceBalancingSystem>(
        build_influence_balancing(sys.positive, sys.negative, sys.theta));
    s.observations.assign(c.horizon, InfluenceBalancingSystem::observation());
    s.params = ib->initial_parameters();
    s.system = std::move(ib);
  }
  return s;
}

void write_checks(CsvWriter& csv, const PolicyVerification& v) {
  for (std::size_t i = 0; i < v.gradient.coordinates.size(); ++i) {
    const auto& cc = v.gradient.coordinates[i];
    csv << v.policy.describe() << std::string(v.compensate ? "true" : "false") << i
        << cc.reference << cc.mean << cc.stderr_mean << cc.z;
    csv.end_row();
  }
}

// JSON has no infinity; a deterministic biased estimator yields one.
Json z_json(double z) { return std::isfinite(z) ? Json(z) : Json(z > 0 ? "inf" : "-inf"); }

Json check_json(const PolicyVerification& v) {
  Json probes = Json::array();
  for (const auto& p : v.probes) {
    probes.push_back({{"timestep", p.timestep},
                      {"max_abs_z", z_json(p.test.max_abs_z)},
                      {"pass", p.test.pass}});
  }
  return {{"policy", policy_to_json(v.policy)},
          {"compensate", v.compensate},
          {"samples", v.gradient.samples},
          {"max_abs_z", z_json(v.gradient.max_abs_z)},
          {"pass", v.gradient.pass},
          {"probes", probes}};
}

}  // namespace

VerificationResult run_verify_unbiased(const VerifyConfig& config, const fs::path& out,
                                       Execution execution) {
  prepare_output(out, to_json(config));
  const VerifySetup setup = make_verify_setup(config);
  const Trajectory traj = forward(*setup.system, setup.params.view(), setup.system->initial_state(),
                                  setup.observations);
  const BpttResult exact = bptt_full(*setup.system, setup.params.view(), traj);

  std::vector<std::size_t> probes = config.probe_timesteps;
  if (probes.empty()) {
    probes = {1, std::max<std::size_t>(1, config.horizon / 2), config.horizon};
    probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
  }

  VerificationResult result;
  result.reference = exact.gradient.values;
  auto verify = [&](const SchedulePolicy& policy, bool compensate, bool with_probes) {
    MonteCarloConfig mc{policy, compensate, config.samples, schedule_seed(config.seed),
                        with_probes ? probes : std::vector<std::size_t>{}};
    const MonteCarloResult r =
        monte_carlo_artbp(*setup.system, setup.params.view(), traj, mc, execution);
    PolicyVerification v{policy, compensate, z_test(exact.gradient.values, r.gradient,
                                                     config.z_threshold), {}};
    for (std::size_t k = 0; k < mc.probe_timesteps.size(); ++k) {
      const std::size_t t = mc.probe_timesteps[k];
      v.probes.push_back({t, z_test(exact.adjoints[t - 1], r.probes[k], config.z_threshold)});
    }
    return v;
  };

  bool pass = true;
  for (const auto& policy : config.policies) {
    result.checks.push_back(verify(policy, true, true));
    const auto& v = result.checks.back();
    pass = pass && v.gradient.pass;
    for (const auto& p : v.probes) pass = pass && p.test.pass;
  }
  if (config.bias_policy) {
    result.bias = verify(*config.bias_policy, false, false);
    result.bias_detected = result.bias->gradient.max_abs_z > config.bias_min_z;
    pass = pass && result.bias_detected;
  }
  result.status = pass ? RunStatus::Ok : RunStatus::VerificationFailed;

  const std::vector<std::string> columns{"policy", "compensate", "coordinate", "reference",
                                         "mean",   "stderr",     "z"};
  {
    CsvWriter report(out / "report.csv", columns);
    for (const auto& v : result.checks) write_checks(report, v);
  }
  {
    CsvWriter probe_csv(out / "probes.csv",
                        {"policy", "timestep", "coordinate", "reference", "mean", "stderr", "z"});
    for (const auto& v : result.checks) {
      for (const auto& p : v.probes) {
        for (std::size_t i = 0; i < p.test.coordinates.size(); ++i) {
          const auto& cc = p.test.coordinates[i];
          probe_csv << v.policy.describe() << p.timestep << i << cc.reference << cc.mean
                    << cc.stderr_mean << cc.z;
          probe_csv.end_row();
        }
      }
    }
  }
  {
    CsvWriter bias(out / "bias.csv", columns);
    if (result.bias) write_checks(bias, *result.bias);
  }
  Json checks = Json::array();
  for (const auto& v : result.checks) checks.push_back(check_json(v));
  write_json(out / "summary.json",
             {{"parameters", setup.params.size()},
              {"horizon", config.horizon},
              {"z_threshold", config.z_threshold},
              {"checks", checks},
              {"bias", result.bias ? check_json(*result.bias) : Json(nullptr)},
              {"bias_detected", result.bias_detected},
              {"pass", pass}});
  return result;
}

// ---------------------------------------------------------------------------
// character-level language model

CharLmConfig char_lm_config(const Json& j) {
  Reader r(j, "char-lm");
  check_experiment(r, "char-lm");
  CharLmConfig c;
  if (const Json* cj = r.find("corpus")) {
    Reader cr(*cj, "char-lm.corpus");
    auto& k = c.corpus;
    k.path = cr.get<std::string>("path", k.path);
    k.train = cr.get<std::string>("train", k.train);
    k.valid = cr.get<std::string>("valid", k.valid);
    k.test = cr.get<std::string>("test", k.test);
    k.train_ratio = cr.real("train_ratio", k.train_ratio);
    k.valid_ratio = cr.real("valid_ratio", k.valid_ratio);
    k.test_ratio = cr.real("test_ratio", k.test_ratio);
    k.lowercase = cr.get<bool>("lowercase", k.lowercase);
    cr.finish();
  }
  c.hidden = r.count("hidden", c.hidden);
  c.init_scale = r.real("init_scale", c.init_scale);
  c.lanes = r.count("lanes", c.lanes);
  c.epochs = r.count("epochs", c.epochs);
  c.seeds = r.seeds("seeds", c.seeds);
  c.learning_rate = r.real("learning_rate", c.learning_rate);
  c.truncated_policy = policy_at(r, "truncated_policy", c.truncated_policy);
  c.artbp_policy = policy_at(r, "artbp_policy", c.artbp_policy);
  if (const Json* a = r.find("algorithms")) {
    if (!a->is_array()) r.fail("algorithms", "expected an array of algorithm names");
    c.algorithms.clear();
    for (const auto& e : *a) {
      if (!e.is_string()) r.fail("algorithms", "expected algorithm names");
      try {
        c.algorithms.push_back(parse_algorithm(e.get<std::string>()));
      } catch (const std::invalid_argument& err) {
        r.fail("algorithms", err.what());
      }
    }
  }
  c.independent_lane_schedules =
      r.get<bool>("independent_lane_schedules", c.independent_lane_schedules);
  r.finish();
  const auto& k = c.corpus;
  const bool split_files = !k.train.empty() || !k.valid.empty() || !k.test.empty();
  if (k.path.empty() == !split_files) {
    throw ConfigError("corpus needs either 'path' or all of 'train', 'valid', 'test'");
  }
  if (split_files && (k.train.empty() || k.valid.empty() || k.test.empty())) {
    throw ConfigError("corpus split files need 'train', 'valid' and 'test'");
  }
  if (c.hidden == 0 || c.lanes == 0) throw ConfigError("hidden and lanes must be >= 1");
  if (c.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  return c;
}

Json to_json(const CharLmConfig& c) {
  Json corpus = {{"lowercase", c.corpus.lowercase}};
  if (!c.corpus.path.empty()) {
    corpus.update({{"path", c.corpus.path},
                   {"train_ratio", c.corpus.train_ratio},
                   {"valid_ratio", c.corpus.valid_ratio},
                   {"test_ratio", c.corpus.test_ratio}});
  } else {
    corpus.update({{"train", c.corpus.train}, {"valid", c.corpus.valid}, {"test", c.corpus.test}});
  }
  Json algorithms = Json::array();
  for (Algorithm a : c.algorithms) algorithms.push_back(to_string(a));
  return {{"experiment", "char-lm"},
          {"corpus", corpus},
          {"hidden", c.hidden},
          {"init_scale", c.init_scale},
          {"lanes", c.lanes},
          {"epochs", c.epochs},
          {"seeds", c.seeds},
          {"learning_rate", c.learning_rate},
          {"truncated_policy", policy_to_json(c.truncated_policy)},
          {"artbp_policy", policy_to_json(c.artbp_policy)},
          {"algorithms", algorithms},
          {"independent_lane_schedules", c.independent_lane_schedules}};
}

double evaluate_bpc(const DynamicalSystem& system, std::span<const double> params,
                    const std::vector<std::uint32_t>& tokens) {
  const auto obs = next_char_observations(tokens);
  if (obs.empty()) return std::numeric_limits<double>::quiet_NaN();
  Vector state = system.initial_state();
  double sum = 0.0;
  for (const auto& o : obs) {
    state = system.step(params, state, o.input);
    sum += system.loss(state, o.target);
  }
  return sum / static_cast<double>(obs.size()) / std::numbers::ln2;
}

CharLmResult run_char_lm(const CharLmConfig& config, const fs::path& out, Execution execution) {
  prepare_output(out, to_json(config));
  const auto& k = config.corpus;
  const CharCorpus corpus =
      k.path.empty()
          ? ingest_splits(k.train, k.valid, k.test, k.lowercase)
          : ingest(k.path, k.lowercase, {k.train_ratio, k.valid_ratio, k.test_ratio});

  std::vector<std::vector<Observation>> lanes;
  for (const auto& lane : make_lanes(corpus.train, config.lanes)) {
    lanes.push_back(next_char_observations(lane));
  }
  if (lanes.front().empty()) throw CorpusError("lanes are too short to form a single step");

  CharLmResult result;
  result.vocabulary = corpus.model_vocab();
  result.train_chars = corpus.train.size();
  for (Algorithm a : config.algorithms) {
    for (std::uint64_t seed : config.seeds) result.curves.push_back({a, seed, {}, {}, {}});
  }

  // Runs fan out; lanes inside a run stay serial when runs already use the pool.
  const Execution lane_execution =
      result.curves.size() > 1 && execution == Execution::Parallel ? Execution::Serial : execution;
  detail::parallel_for(result.curves.size(), execution, [&](std::size_t r) {
    auto& curve = result.curves[r];
    const auto system = build_lstm_char(result.vocabulary, config.hidden, curve.seed,
                                        config.init_scale);
    ParameterVector params = system.initial_parameters();
    Optimizer opt = Adam(Adam::Settings{config.learning_rate}, params.size());
    const SchedulePolicy& policy = curve.algorithm == Algorithm::Artbp ? config.artbp_policy
                                                                        : config.truncated_policy;
    BatchOptions options{config.independent_lane_schedules, lane_execution};
    curve.trace = train_batched(
        system, params, lanes, policy, curve.algorithm, opt, config.epochs,
        schedule_seed(curve.seed), options, [&](std::size_t, const ParameterVector& p) {
          curve.valid_bpc.push_back(evaluate_bpc(system, p.view(), corpus.valid));
        });
    for (double nats : curve.trace.epoch_mean_loss) {
      curve.train_bpc.push_back(nats / std::numbers::ln2);
    }
  });

  CsvWriter csv(out / "curves.csv", {"epoch", "seed", "algorithm", "train_bpc", "valid_bpc"});
  Json finals = Json::array();
  for (auto& curve : result.curves) {
    for (std::size_t e = 0; e < curve.train_bpc.size(); ++e) {
      csv << e + 1 << static_cast<std::size_t>(curve.seed) << to_string(curve.algorithm)
          << curve.train_bpc[e] << curve.valid_bpc[e];
      csv.end_row();
    }
    if (curve.trace.diverged()) result.status = RunStatus::Diverged;
    finals.push_back({{"algorithm", to_string(curve.algorithm)},
                      {"seed", curve.seed},
                      {"epochs_completed", curve.train_bpc.size()},
                      {"final_train_bpc", curve.train_bpc.empty() ? Json(nullptr)
                                                                  : Json(curve.train_bpc.back())},
                      {"divergence", divergence_json(curve.trace)}});
  }
  write_json(out / "summary.json", {{"vocabulary", result.vocabulary},
                                    {"log2_vocabulary", std::log2(result.vocabulary)},
                                    {"train_chars", result.train_chars},
                                    {"valid_chars", corpus.valid.size()},
                                    {"source_sha256", corpus.source_hashes},
                                    {"runs", finals}});
  return result;
}

// ---------------------------------------------------------------------------
// schedule statistics

ScheduleStatsConfig schedule_stats_config(const Json& j) {
  Reader r(j, "schedule-stats");
  check_experiment(r, "schedule-stats");
  ScheduleStatsConfig c;
  c.policy = policy_at(r, "policy", c.policy);
  c.draws = r.count("draws", c.draws);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  r.finish();
  if (std::holds_alternative<NeverTruncate>(c.policy.variant())) {
    throw ConfigError("schedule-stats needs a policy that truncates");
  }
  if (c.draws == 0) throw ConfigError("draws must be >= 1");
  return c;
}

Json to_json(const ScheduleStatsConfig& c) {
  return {{"experiment", "schedule-stats"},
          {"policy", policy_to_json(c.policy)},
          {"draws", c.draws},
          {"seed", c.seed}};
}

ScheduleStatsResult run_schedule_stats(const ScheduleStatsConfig& config, const fs::path& out) {
  prepare_output(out, to_json(config));
  StreamRng rng(config.seed, 0);
  std::vector<std::size_t> lengths(config.draws);
  std::map<std::size_t, std::size_t> histogram;
  for (auto& L : lengths) {
    L = next_subsequence_length(config.policy, rng);
    ++histogram[L];
  }
  ScheduleStatsResult result{length_statistics(lengths), nominal_mean(config.policy),
                             RunStatus::Ok};

  CsvWriter csv(out / "histogram.csv", {"length", "count"});
  for (const auto& [L, n] : histogram) {
    csv << L << n;
    csv.end_row();
  }
  Json survival = Json::array();
  for (const auto& [L, frac] : result.stats.survival) survival.push_back({L, frac});
  write_json(out / "summary.json", {{"policy", policy_to_json(config.policy)},
                                    {"draws", result.stats.count},
                                    {"mean", result.stats.mean},
                                    {"variance", result.stats.variance},
                                    {"stderr_mean", result.stats.stderr_mean},
                                    {"max", result.stats.max},
                                    {"nominal_mean", result.nominal_mean},
                                    {"survival", survival}});
  return result;
}

}  // namespace artbp
