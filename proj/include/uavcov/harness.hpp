#pragma once

// Experiment orchestration: seed fan-out, sweeps over K / R_th / L, policy
// evaluation, aggregation with Student-t intervals, and file outputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavcov/baselines.hpp"
#include "uavcov/channel.hpp"
#include "uavcov/marl.hpp"
#include "uavcov/scenario.hpp"

namespace uavcov {

enum class Algorithm { maddpg, dqn, equal };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
const char* to_string(FadingMode m);
FadingMode parse_fading(const std::string& s);

/// Thrown for malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SweepPoint {
  std::size_t clusters = 5;
  double rate_threshold = 30e6;  // bit/s
  double side_len = 10000.0;     // m
};

struct ExperimentConfig {
  FieldConfig field;
  ChannelParams channel;
  TrainConfig train;
  DqnConfig dqn;
  Algorithm algorithm = Algorithm::maddpg;
  std::vector<std::size_t> clusters = {5};
  std::vector<double> rate_thresholds = {30e6};
  std::vector<double> side_lengths = {10000.0};
  std::vector<std::uint64_t> seeds = {0};
  FadingMode fading = FadingMode::sampled;
  InterferencePower interference = InterferencePower::current_mean;
  std::size_t eval_steps = 100;
  std::size_t jobs = 0;  // 0: hardware concurrency

  /// Throws ConfigError.
  void validate() const;
  /// Cartesian product of the sweep axes, K fastest.
  std::vector<SweepPoint> points() const;
  /// Field configuration at one sweep point.
  FieldConfig field_at(const SweepPoint& p) const;
  /// Stable text form of everything except the seed list.
  std::string canonical(const SweepPoint& p) const;
  std::uint64_t config_hash(const SweepPoint& p) const;
};

/// Desk-scale defaults with the tuned training reward.
ExperimentConfig default_experiment();

/// Metrics of a noise-free rollout of the final policy.
struct PolicyEvaluation {
  std::vector<double> served;          // per step
  std::vector<double> power_fraction;  // per step
  double final_served = 0.0;           // mean over the last 10% of steps
  double final_power_fraction = 0.0;
};

struct RunSummary {
  Algorithm algorithm = Algorithm::maddpg;
  SweepPoint point;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::size_t num_ues = 0;
  std::vector<EpisodeMetrics> episodes;
  double served = 0.0;          // headline, from the configured fading mode
  double power_fraction = 0.0;  // headline
  double served_expected = 0.0;
  double served_sampled = 0.0;
  double power_fraction_expected = 0.0;
  double power_fraction_sampled = 0.0;
  std::size_t budget_checks = 0;
  std::size_t budget_violations = 0;
  double wall_clock_s = 0.0;  // not written to output files
  bool ok = true;
  std::string error;
};

/// UE layout and clustering for one run. The layout depends only on the seed
/// and grid, so different K or L reuse the same cells.
struct Deployment {
  std::vector<Point2> ues;
  ClusterAssignment assignment;
};

Deployment deploy(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed);
CoverageEnv make_environment(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                             const Deployment& deployment);

/// Resets `env`, then calls `policy` once per step for `steps` steps; the
/// policy must leave a freshly evaluated allocation behind.
PolicyEvaluation evaluate_policy(CoverageEnv& env, std::size_t steps,
                                 const std::function<void(CoverageEnv&)>& policy);

/// Trained artefacts kept when checkpoints are requested.
struct TrainedPolicy {
  JointLayout layout;
  std::vector<AgentBundle> agents;  // maddpg
  std::optional<DqnAgent> dqn;      // dqn
};

/// Deploy, train (if the algorithm learns), evaluate. Failures are captured in
/// the summary rather than thrown.
RunSummary run_single(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                      TrainedPolicy* trained = nullptr);

/// Evaluation of an already trained policy on its deployment.
RunSummary evaluate_trained(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                            const TrainedPolicy& trained);

/// Every (point, seed) pair on a bounded worker pool. Results are ordered by
/// point, then seed, regardless of completion order.
std::vector<RunSummary> run_experiment(const ExperimentConfig& config,
                                       const std::function<void(const RunSummary&)>& on_done = {},
                                       std::vector<TrainedPolicy>* trained = nullptr);

struct AggregateStat {
  double mean = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::size_t n = 0;
};

/// Mean and Student-t 95% interval (n - 1 degrees of freedom); a single
/// value gives a zero-width interval.
AggregateStat aggregate(std::span<const double> values);

/// Throws std::runtime_error if `dir` cannot be created or written.
void ensure_writable(const std::filesystem::path& dir);

std::string run_file_stem(const RunSummary& s);

/// Per-run CSV series, summary.json and manifest.json under `out_dir`.
void emit_outputs(const std::vector<RunSummary>& summaries, const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

/// Actor/critic (or Q-network) checkpoints for one run.
void save_checkpoints(const TrainedPolicy& trained, const std::filesystem::path& dir);
TrainedPolicy load_checkpoints(const std::filesystem::path& dir, Algorithm algorithm);

// Config files: `key = value` lines, `#` comments, lists comma separated.

/// Applies one key. Throws ConfigError for unknown keys or bad values.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
void apply_config_text(ExperimentConfig& config, const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = default_experiment());
/// Flat key/value rendering accepted by apply_config_text.
std::string render_config(const ExperimentConfig& config);

}  // namespace uavcov
