#pragma once

// Comparison policies: equal power split and a centralised DQN that nudges
// one UE's power per step.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uavcov/marl.hpp"
#include "uavcov/neural.hpp"
#include "uavcov/scenario.hpp"

namespace uavcov {

/// Every UE of cluster j gets P_t / N_j.
PowerAllocation equal_power_allocation(std::span<const std::size_t> cluster_sizes, double power_budget);

struct DqnConfig {
  TrainConfig train;             // shared schedule, buffer, batch, gamma, tau, widths, reward
  double learning_rate = 1e-4;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double decay_fraction = 0.5;   // of all training steps

  /// Linear decay from epsilon_start to epsilon_end, then flat.
  double epsilon_at(std::size_t step, std::size_t total_steps) const;
  void validate() const;
};

/// Action a < 2N moves UE a/2 by +delta_max (even a) or -delta_max (odd a);
/// a == 2N is a no-op.
inline std::size_t dqn_action_count(std::size_t num_ues) { return 2 * num_ues + 1; }

struct DqnAgent {
  MlpParams qnet;
  MlpParams target;
  AdamState opt;
};

DqnAgent make_dqn_agent(RandomStream& rng, std::size_t state_width, std::size_t num_ues,
                        const DqnConfig& config);

/// Epsilon-greedy; greedy ties go to the lowest index.
std::size_t dqn_select_action(const MlpParams& qnet, const Eigen::VectorXd& state, double epsilon,
                              RandomStream& rng);

/// Gradient of (1/W) sum (r + gamma max Q'(s', .) - Q(s, a))^2 w.r.t. qnet.
MlpGradients dqn_loss_gradient(const MlpParams& qnet, const MlpParams& target, const Batch& batch, double gamma,
                               double* loss = nullptr);

/// One Adam step on the TD loss, then a Polyak target update. Returns the
/// loss before the step; throws on a non-finite loss.
double dqn_train_step(DqnAgent& agent, const Batch& batch, double gamma, double tau);

/// Applies a discrete action through the budget projection and re-evaluates.
void apply_dqn_action(CoverageEnv& env, std::size_t action, double delta_max, BudgetAudit* audit);

struct DqnOutcome {
  std::vector<EpisodeMetrics> episodes;
  std::vector<double> step_rewards;
  DqnAgent agent;
  JointLayout layout;
  BudgetAudit audit;
  std::size_t updates = 0;
};

DqnOutcome run_dqn_training(CoverageEnv& env, const DqnConfig& config, RandomStream& rng,
                            const std::function<void(std::size_t, const EpisodeMetrics&)>& on_episode = {});

}  // namespace uavcov
