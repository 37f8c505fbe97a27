#include "uavcov/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uavcov {

PowerAllocation equal_power_allocation(std::span<const std::size_t> cluster_sizes, double power_budget) {
  if (!(power_budget > 0.0)) throw std::invalid_argument("power budget must be positive");
  PowerAllocation a;
  a.powers.reserve(cluster_sizes.size());
  for (std::size_t n : cluster_sizes) {
    if (n == 0) throw std::invalid_argument("equal split of an empty cluster");
    a.powers.emplace_back(n, power_budget / static_cast<double>(n));
  }
  return a;
}

double DqnConfig::epsilon_at(std::size_t step, std::size_t total_steps) const {
  const double horizon = decay_fraction * static_cast<double>(total_steps);
  if (!(horizon > 0.0) || static_cast<double>(step) >= horizon) return epsilon_end;
  const double f = static_cast<double>(step) / horizon;
  return epsilon_start + f * (epsilon_end - epsilon_start);
}

void DqnConfig::validate() const {
  train.validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("DQN learning rate must be positive");
  auto in_unit = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!in_unit(epsilon_start) || !in_unit(epsilon_end)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(decay_fraction >= 0.0 && decay_fraction <= 1.0)) throw std::invalid_argument("decay fraction must lie in [0, 1]");
}

DqnAgent make_dqn_agent(RandomStream& rng, std::size_t state_width, std::size_t num_ues,
                        const DqnConfig& config) {
  std::vector<std::size_t> sizes{state_width};
  sizes.insert(sizes.end(), config.train.hidden.begin(), config.train.hidden.end());
  sizes.push_back(dqn_action_count(num_ues));
  DqnAgent a;
  a.qnet = init_params(rng, sizes, Activation::linear);
  a.target = a.qnet;
  a.opt = AdamState::for_params(a.qnet, config.learning_rate);
  return a;
}

std::size_t dqn_select_action(const MlpParams& qnet, const Eigen::VectorXd& state, double epsilon,
                              RandomStream& rng) {
  const std::size_t n = qnet.output_size();
  if (rng.uniform() < epsilon) return rng.index(n);
  const Eigen::VectorXd q = forward(qnet, state);
  std::size_t best = 0;
  for (std::size_t a = 1; a < n; ++a) {
    if (q(static_cast<Eigen::Index>(a)) > q(static_cast<Eigen::Index>(best))) best = a;
  }
  return best;
}

MlpGradients dqn_loss_gradient(const MlpParams& qnet, const MlpParams& target, const Batch& batch, double gamma,
                               double* loss) {
  const Eigen::Index w = batch.states.cols();
  const Eigen::RowVectorXd next_max = forward(target, batch.next_states).colwise().maxCoeff();
  const Eigen::RowVectorXd y = batch.reward_for(0) + gamma * next_max;

  ForwardCache cache;
  const Eigen::MatrixXd q = forward(qnet, batch.states, &cache);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < w; ++c) {
    const auto a = static_cast<Eigen::Index>(std::lround(batch.actions(0, c)));
    if (a < 0 || a >= q.rows()) throw std::invalid_argument("stored DQN action out of range");
    const double diff = q(a, c) - y(c);
    total += diff * diff;
    dq(a, c) = 2.0 * diff / static_cast<double>(w);
  }
  if (loss != nullptr) *loss = total / static_cast<double>(w);
  MlpGradients g = MlpGradients::zeros_like(qnet);
  backward(qnet, cache, dq, &g, false);
  return g;
}

double dqn_train_step(DqnAgent& agent, const Batch& batch, double gamma, double tau) {
  double loss = 0.0;
  const MlpGradients g = dqn_loss_gradient(agent.qnet, agent.target, batch, gamma, &loss);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite DQN loss");
  adam_step(agent.qnet, g, agent.opt);
  soft_update(agent.target, agent.qnet, tau);
  return loss;
}

void apply_dqn_action(CoverageEnv& env, std::size_t action, double delta_max, BudgetAudit* audit) {
  const std::size_t n = env.snapshot().ue_positions.size();
  if (action > 2 * n) throw std::invalid_argument("DQN action out of range");
  if (action < 2 * n) {
    const std::size_t ue = action / 2;
    const std::size_t j = env.assignment().labels.at(ue);
    const auto& members = env.assignment().members[j];
    const auto slot = static_cast<std::size_t>(std::find(members.begin(), members.end(), ue) - members.begin());
    ActionVector act;
    act.deltas.assign(members.size(), 0.0);
    act.deltas.at(slot) = action % 2 == 0 ? 1.0 : -1.0;
    PowerAllocation next = env.allocation();
    const double budget = env.field().power_budget;
    next.powers[j] = apply_action(next.powers[j], act, delta_max, env.distances(j), budget);
    if (audit != nullptr) {
      ++audit->checks;
      double total = 0.0;
      for (double p : next.powers[j]) total += p;
      if (!(total <= budget + 1e-9)) ++audit->violations;
    }
    env.set_allocation(std::move(next));
  }
  env.evaluate();
}

DqnOutcome run_dqn_training(CoverageEnv& env, const DqnConfig& config, RandomStream& rng,
                            const std::function<void(std::size_t, const EpisodeMetrics&)>& on_episode) {
  config.validate();
  const auto& sizes = env.assignment().sizes;
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  const std::size_t n = env.snapshot().ue_positions.size();
  DqnOutcome out;
  out.layout = {env.num_clusters(), config.train.pad_width == 0 ? largest : config.train.pad_width};
  if (out.layout.pad_width < largest) throw std::invalid_argument("pad width smaller than the largest cluster");

  RandomStream init_rng = rng.derive(1);
  RandomStream explore_rng = rng.derive(2);
  RandomStream sample_rng = rng.derive(3);
  out.agent = make_dqn_agent(init_rng, out.layout.state_width(), n, config);
  ReplayBuffer buffer(config.train.buffer, out.layout.state_width(), 1, 1);
  const double delta_max = config.train.delta_max_fraction * env.field().power_budget;
  const std::size_t total_steps = config.train.episodes * config.train.steps_per_episode;
  TrainConfig reward_cfg = config.train;
  reward_cfg.per_agent_reward = false;

  std::size_t step = 0;
  Transition tr;
  for (std::size_t ep = 0; ep < config.train.episodes; ++ep) {
    env.reset();
    tr.global_state = global_state(env, out.layout.pad_width);
    EpisodeMetrics metrics;
    for (std::size_t t = 0; t < config.train.steps_per_episode; ++t, ++step) {
      const Eigen::Map<const Eigen::VectorXd> s(tr.global_state.data(), static_cast<Eigen::Index>(tr.global_state.size()));
      const std::size_t a = dqn_select_action(out.agent.qnet, s, config.epsilon_at(step, total_steps), explore_rng);
      apply_dqn_action(env, a, delta_max, &out.audit);
      double logged = 0.0;
      tr.reward = training_rewards(env, reward_cfg, &logged).front();
      tr.joint_action = {static_cast<double>(a)};
      tr.next_global_state = global_state(env, out.layout.pad_width);
      buffer.push(tr);
      tr.global_state = tr.next_global_state;

      out.step_rewards.push_back(logged);
      metrics.mean_step_reward += logged;
      metrics.served += static_cast<double>(env.last_evaluation().total_served);
      metrics.power_fraction += env.power_fraction();

      if (buffer.size() >= config.train.batch) {
        dqn_train_step(out.agent, buffer.sample(config.train.batch, sample_rng), config.train.gamma, config.train.tau);
        ++out.updates;
      }
    }
    const double steps = static_cast<double>(config.train.steps_per_episode);
    metrics.mean_step_reward /= steps;
    metrics.served /= steps;
    metrics.power_fraction /= steps;
    out.episodes.push_back(metrics);
    if (on_episode) on_episode(ep, metrics);
  }
  return out;
}

}  // namespace uavcov
