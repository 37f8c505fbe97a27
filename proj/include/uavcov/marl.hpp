#pragma once

// Multi-agent DDPG power allocation: one agent per UAV, decentralised actors
// over local observations, centralised critics over the joint state/action.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uavcov/channel.hpp"
#include "uavcov/clustering.hpp"
#include "uavcov/neural.hpp"
#include "uavcov/random.hpp"
#include "uavcov/scenario.hpp"

namespace uavcov {

// ---------------------------------------------------------------------------
// State, action and reward

/// Local state of one agent, padded to a common width.
struct Observation {
  std::vector<double> powers;  // W
  std::vector<double> rates;   // divided by R_th
  double count = 0.0;          // cluster size / pad width
  std::vector<bool> mask;

  std::size_t pad_width() const { return powers.size(); }
  /// Network input: powers, rates, count.
  static std::size_t feature_width(std::size_t pad_width) { return 2 * pad_width + 1; }
  void write_features(std::span<double> out) const;
};

struct ActionVector {
  std::vector<double> deltas;  // in [-1, 1], padded slots zero
};

Observation build_observation(std::size_t cluster_id, const ClusterAssignment& assignment,
                              const PowerAllocation& allocation, const EvaluationResult& eval,
                              double rate_threshold, std::size_t pad_width);

/// Candidate P + delta_max * a clamped to [0, P_t]. If the candidates exceed
/// the budget, UEs are granted their candidate in ascending distance order
/// until the budget runs short; the next UE gets the remainder and the rest
/// get nothing.
std::vector<double> apply_action(std::span<const double> powers, const ActionVector& action,
                                 double delta_max, std::span<const double> distances,
                                 double power_budget);

/// Reading of the rate component of the reward.
enum class RewardForm {
  capped,   // all UEs' rates minus the served excess: served UEs count R_th
  literal,  // only served UEs' rates minus their excess
};

struct RewardBreakdown {
  double served = 0.0;     // U
  double rate_term = 0.0;  // (sum R - W_d) / R_th
  double total = 0.0;
};

/// r = U + (sum R - W_d) / R_th over the whole network.
RewardBreakdown compute_reward(const EvaluationResult& eval, double rate_threshold,
                               RewardForm form = RewardForm::capped);

/// Same terms restricted to one cluster's UEs.
RewardBreakdown compute_cluster_reward(const EvaluationResult& eval, const ClusterAssignment& assignment,
                                       std::size_t cluster_id, double rate_threshold,
                                       RewardForm form = RewardForm::capped);

// ---------------------------------------------------------------------------
// Environment

/// A deployed network (UEs, clusters, UAVs) whose allocation evolves step by
/// step. Every evaluation redraws fading from the environment's own stream.
class CoverageEnv {
 public:
  CoverageEnv(std::vector<Point2> ues, ClusterAssignment assignment, const ChannelParams& params,
              const FieldConfig& field, FadingMode mode, RandomStream fading_rng,
              InterferencePower interference = InterferencePower::current_mean);

  /// Equal split P_t / N_j, then evaluate.
  void reset();
  void set_allocation(PowerAllocation allocation);
  const EvaluationResult& evaluate();

  const NetworkSnapshot& snapshot() const { return snapshot_; }
  const PowerAllocation& allocation() const { return snapshot_.allocation; }
  const EvaluationResult& last_evaluation() const { return last_; }
  const ClusterAssignment& assignment() const { return snapshot_.assignment; }
  const FieldConfig& field() const { return field_; }
  const ChannelParams& channel() const { return params_; }
  std::size_t num_clusters() const { return snapshot_.assignment.num_clusters(); }
  /// Horizontal UE-UAV distances in cluster slot order.
  std::span<const double> distances(std::size_t cluster_id) const { return distances_[cluster_id]; }
  /// Sum of allocated power over K * P_t.
  double power_fraction() const;
  Observation observe(std::size_t cluster_id, std::size_t pad_width) const;
  void set_fading_mode(FadingMode mode) { mode_ = mode; }
  void reseed_fading(RandomStream rng) { fading_rng_ = rng; }

 private:
  NetworkSnapshot snapshot_;
  ChannelParams params_;
  FieldConfig field_;
  FadingMode mode_;
  RandomStream fading_rng_;
  InterferencePower interference_;
  std::vector<std::vector<double>> distances_;
  EvaluationResult last_;
};

// ---------------------------------------------------------------------------
// Replay

struct Transition {
  std::vector<double> global_state;
  std::vector<double> joint_action;
  double reward = 0.0;
  /// Per-agent rewards; empty means every agent receives `reward`.
  std::vector<double> agent_rewards;
  std::vector<double> next_global_state;
};

/// Sampled transitions, one per column. `rewards` has one row per reward
/// stream (1 when the reward is shared).
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd rewards;
  Eigen::MatrixXd next_states;

  std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
  Eigen::RowVectorXd reward_for(std::size_t agent) const {
    return rewards.row(std::min<Eigen::Index>(static_cast<Eigen::Index>(agent), rewards.rows() - 1));
  }
};

/// Fixed-capacity FIFO ring shared by all agents.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_width, std::size_t action_width,
               std::size_t reward_width = 1);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_width() const { return state_width_; }
  std::size_t action_width() const { return action_width_; }
  std::size_t reward_width() const { return reward_width_; }
  /// Logical index 0 is the oldest stored transition.
  Transition at(std::size_t index) const;
  /// Uniform with replacement. Throws std::logic_error if size() < count.
  Batch sample(std::size_t count, RandomStream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t state_width_;
  std::size_t action_width_;
  std::size_t reward_width_;
  std::size_t stride_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::vector<double> data_;  // stride_ doubles per slot, grown on demand
};

/// Pushes `transition` then draws `count` samples.
Batch store_and_sample(ReplayBuffer& buffer, const Transition& transition, std::size_t count,
                       RandomStream& rng);

// ---------------------------------------------------------------------------
// Agents and training

struct TrainConfig {
  std::size_t episodes = 100;           // M
  std::size_t steps_per_episode = 200;  // T
  std::size_t batch = 64;               // W
  std::size_t buffer = 100000;          // B_s
  double gamma = 0.95;
  double tau = 0.01;
  double noise_sigma = 0.2;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double delta_max_fraction = 0.05;   // delta_max = fraction * P_t
  std::size_t pad_width = 0;          // 0: largest cluster
  std::vector<std::size_t> hidden = {128, 128};
  RewardForm reward_form = RewardForm::capped;
  bool per_agent_reward = false;
  double power_penalty = 0.0;  // reward cost per UAV at full budget
  double oversupply_penalty = 0.0;  // reward cost per R_th of rate above R_th
  double reward_scale = 1.0;   // applied to rewards before they enter the critic
  double preact_penalty = 0.0;  // L2 weight on actor output pre-activations

  void validate() const;
};

/// Widths of the joint state/action vectors for K agents.
struct JointLayout {
  std::size_t agents = 0;
  std::size_t pad_width = 0;

  std::size_t obs_width() const { return Observation::feature_width(pad_width); }
  std::size_t state_width() const { return agents * obs_width(); }
  std::size_t action_width() const { return agents * pad_width; }
  std::size_t critic_input() const { return state_width() + action_width(); }
};

struct AgentBundle {
  MlpParams actor;
  MlpParams critic;
  MlpParams target_actor;
  MlpParams target_critic;
  AdamState actor_opt;
  AdamState critic_opt;
  Eigen::VectorXd mask;  // 1 for real UE slots
};

AgentBundle make_agent(RandomStream& rng, const JointLayout& layout, std::size_t cluster_size,
                       const TrainConfig& config);

/// mu(o) + N(0, sigma^2) per slot, clipped to [-1, 1], padded slots zeroed.
ActionVector select_action(const AgentBundle& agent, const Observation& obs, double noise_sigma,
                           RandomStream& rng);

struct TrainStepStats {
  std::vector<double> critic_loss;  // per agent, before the update
  std::vector<double> mean_q;       // per agent, actor objective before the update
};

/// Critic regression to r + gamma Q'(s', mu'(o')), deterministic policy
/// gradient for each actor, then Polyak updates of both targets.
TrainStepStats train_step(std::vector<AgentBundle>& agents, const Batch& batch, const JointLayout& layout,
                          double gamma, double tau, double preact_penalty = 0.0);

/// Gradient of (1/W) sum (Q(input) - targets)^2 w.r.t. the critic parameters.
MlpGradients critic_loss_gradient(const MlpParams& critic, const Eigen::MatrixXd& input,
                                  const Eigen::RowVectorXd& targets, double* loss = nullptr);

/// Gradient of -(1/W) sum Q_j(s, a_1..mu_j(o_j)..a_K) + preact_penalty *
/// (1/W) sum |z_j|^2 w.r.t. actor j's parameters, with the critic held fixed.
/// z_j is the actor's output pre-activation on real UE slots. `objective`
/// receives the mean Q.
MlpGradients actor_loss_gradient(const std::vector<AgentBundle>& agents, std::size_t agent,
                                 const Batch& batch, const JointLayout& layout, double* objective = nullptr,
                                 double preact_penalty = 0.0);

/// Concatenated features of every agent's observation.
std::vector<double> global_state(const CoverageEnv& env, std::size_t pad_width);

/// Counts post-projection budget checks (C4) and their failures.
struct BudgetAudit {
  std::size_t checks = 0;
  std::size_t violations = 0;
};

struct EpisodeMetrics {
  double mean_step_reward = 0.0;
  double served = 0.0;          // mean over steps
  double power_fraction = 0.0;  // mean over steps
};

struct TrainingOutcome {
  std::vector<EpisodeMetrics> episodes;
  std::vector<double> step_rewards;
  std::vector<AgentBundle> agents;
  JointLayout layout;
  BudgetAudit audit;
  std::size_t updates = 0;
};

/// One environment step driven by the actors; returns the joint action.
std::vector<ActionVector> act_and_apply(CoverageEnv& env, const std::vector<AgentBundle>& agents,
                                        const JointLayout& layout, double noise_sigma, double delta_max,
                                        RandomStream& rng, BudgetAudit* audit);

/// Rewards fed to the critics: the network reward (or each agent's cluster
/// reward) minus the power cost, times reward_scale. `logged` receives the
/// unscaled network-level value.
std::vector<double> training_rewards(const CoverageEnv& env, const TrainConfig& config,
                                     double* logged = nullptr);

/// Full training loop. `env` must already carry the clustering and UAV
/// placement; it is reset at the start of every episode.
TrainingOutcome run_training(CoverageEnv& env, const TrainConfig& config, RandomStream& rng,
                             const std::function<void(std::size_t, const EpisodeMetrics&)>& on_episode = {});

}  // namespace uavcov
