#include "uavcov/marl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace uavcov {

// ---------------------------------------------------------------------------
// State, action and reward

void Observation::write_features(std::span<double> out) const {
  const std::size_t m = pad_width();
  if (out.size() != feature_width(m)) {
    throw std::invalid_argument("feature buffer has the wrong width");
  }
  std::copy(powers.begin(), powers.end(), out.begin());
  std::copy(rates.begin(), rates.end(), out.begin() + static_cast<std::ptrdiff_t>(m));
  out[2 * m] = count;
}

Observation build_observation(std::size_t cluster_id, const ClusterAssignment& assignment,
                              const PowerAllocation& allocation, const EvaluationResult& eval,
                              double rate_threshold, std::size_t pad_width) {
  const auto& members = assignment.members.at(cluster_id);
  if (members.size() > pad_width) {
    throw std::invalid_argument("cluster of " + std::to_string(members.size()) +
                                " UEs does not fit pad width " + std::to_string(pad_width));
  }
  const auto& powers = allocation.powers.at(cluster_id);
  if (powers.size() != members.size()) {
    throw std::invalid_argument("allocation does not match cluster size");
  }
  Observation obs;
  obs.powers.assign(pad_width, 0.0);
  obs.rates.assign(pad_width, 0.0);
  obs.mask.assign(pad_width, false);
  for (std::size_t s = 0; s < members.size(); ++s) {
    obs.powers[s] = powers[s];
    obs.rates[s] = eval.per_ue.at(members[s]).rate / rate_threshold;
    obs.mask[s] = true;
  }
  obs.count = static_cast<double>(members.size()) / static_cast<double>(pad_width);
  return obs;
}

std::vector<double> apply_action(std::span<const double> powers, const ActionVector& action,
                                 double delta_max, std::span<const double> distances,
                                 double power_budget) {
  if (!(power_budget >= 0.0)) {
    throw std::invalid_argument("power budget must be non-negative");
  }
  const std::size_t n = powers.size();
  if (action.deltas.size() < n || distances.size() != n) {
    throw std::invalid_argument("action/distance lengths do not cover the cluster");
  }
  std::vector<double> cand(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cand[i] = std::clamp(powers[i] + delta_max * action.deltas[i], 0.0, power_budget);
    total += cand[i];
  }
  if (total <= power_budget) return cand;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  std::vector<double> out(n, 0.0);
  double remaining = power_budget;
  for (std::size_t i : order) {
    if (cand[i] <= remaining) {
      out[i] = cand[i];
      remaining -= cand[i];
    } else {
      out[i] = remaining;
      remaining = 0.0;
    }
  }
  return out;
}

namespace {

RewardBreakdown reward_over(const EvaluationResult& eval, std::span<const std::size_t> ues,
                            bool all_ues, double rate_threshold, RewardForm form) {
  double served = 0.0, rates = 0.0, wasted = 0.0;
  const std::size_t n = all_ues ? eval.per_ue.size() : ues.size();
  for (std::size_t idx = 0; idx < n; ++idx) {
    const LinkStats& st = eval.per_ue[all_ues ? idx : ues[idx]];
    if (st.served) {
      served += 1.0;
      wasted += st.rate - rate_threshold;
    }
    if (form == RewardForm::capped || st.served) rates += st.rate;
  }
  RewardBreakdown r;
  r.served = served;
  r.rate_term = (rates - wasted) / rate_threshold;
  r.total = r.served + r.rate_term;
  return r;
}

}  // namespace

RewardBreakdown compute_reward(const EvaluationResult& eval, double rate_threshold, RewardForm form) {
  return reward_over(eval, {}, true, rate_threshold, form);
}

RewardBreakdown compute_cluster_reward(const EvaluationResult& eval, const ClusterAssignment& assignment,
                                       std::size_t cluster_id, double rate_threshold, RewardForm form) {
  return reward_over(eval, assignment.members.at(cluster_id), false, rate_threshold, form);
}

// ---------------------------------------------------------------------------
// Environment

CoverageEnv::CoverageEnv(std::vector<Point2> ues, ClusterAssignment assignment, const ChannelParams& params,
                         const FieldConfig& field, FadingMode mode, RandomStream fading_rng,
                         InterferencePower interference)
    : params_(params), field_(field), mode_(mode), fading_rng_(fading_rng), interference_(interference) {
  params_.validate();
  field_.validate();
  snapshot_.uav_positions = place_uavs(assignment, field_);
  snapshot_.ue_positions = std::move(ues);
  snapshot_.assignment = std::move(assignment);
  const auto& asg = snapshot_.assignment;
  distances_.resize(asg.num_clusters());
  for (std::size_t j = 0; j < asg.num_clusters(); ++j) {
    if (asg.members[j].empty()) throw std::invalid_argument("empty cluster in environment");
    for (std::size_t i : asg.members[j]) {
      distances_[j].push_back(link_geometry(snapshot_.ue_positions.at(i), snapshot_.uav_positions[j]).horiz_dist);
    }
  }
  reset();
}

void CoverageEnv::reset() {
  const auto& asg = snapshot_.assignment;
  PowerAllocation a;
  a.powers.resize(asg.num_clusters());
  for (std::size_t j = 0; j < asg.num_clusters(); ++j) {
    a.powers[j].assign(asg.members[j].size(), field_.power_budget / static_cast<double>(asg.members[j].size()));
  }
  snapshot_.allocation = std::move(a);
  evaluate();
}

void CoverageEnv::set_allocation(PowerAllocation allocation) {
  if (allocation.powers.size() != num_clusters()) {
    throw std::invalid_argument("allocation cluster count mismatch");
  }
  snapshot_.allocation = std::move(allocation);
}

const EvaluationResult& CoverageEnv::evaluate() {
  last_ = evaluate_network(snapshot_, params_, field_, fading_rng_, mode_, interference_);
  return last_;
}

double CoverageEnv::power_fraction() const {
  return snapshot_.allocation.total() / (static_cast<double>(num_clusters()) * field_.power_budget);
}

Observation CoverageEnv::observe(std::size_t cluster_id, std::size_t pad_width) const {
  return build_observation(cluster_id, snapshot_.assignment, snapshot_.allocation, last_,
                           field_.rate_threshold, pad_width);
}

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_width, std::size_t action_width,
                           std::size_t reward_width)
    : capacity_(capacity),
      state_width_(state_width),
      action_width_(action_width),
      reward_width_(reward_width),
      stride_(2 * state_width + action_width + reward_width) {
  if (capacity == 0 || reward_width == 0) {
    throw std::invalid_argument("replay buffer needs positive capacity and reward width");
  }
}

void ReplayBuffer::push(const Transition& t) {
  if (t.global_state.size() != state_width_ || t.next_global_state.size() != state_width_ ||
      t.joint_action.size() != action_width_) {
    throw std::invalid_argument("transition widths do not match the replay buffer");
  }
  if (!t.agent_rewards.empty() && t.agent_rewards.size() != reward_width_) {
    throw std::invalid_argument("per-agent reward count does not match the replay buffer");
  }
  if (size_ < capacity_ && data_.size() < (next_ + 1) * stride_) {
    data_.resize((next_ + 1) * stride_);
  }
  double* slot = data_.data() + next_ * stride_;
  slot = std::copy(t.global_state.begin(), t.global_state.end(), slot);
  slot = std::copy(t.joint_action.begin(), t.joint_action.end(), slot);
  for (std::size_t r = 0; r < reward_width_; ++r) {
    *slot++ = t.agent_rewards.empty() ? t.reward : t.agent_rewards[r];
  }
  std::copy(t.next_global_state.begin(), t.next_global_state.end(), slot);
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t phys = size_ < capacity_ ? index : (next_ + index) % capacity_;
  const double* slot = data_.data() + phys * stride_;
  Transition t;
  t.global_state.assign(slot, slot + state_width_);
  slot += state_width_;
  t.joint_action.assign(slot, slot + action_width_);
  slot += action_width_;
  t.reward = slot[0];
  if (reward_width_ > 1) t.agent_rewards.assign(slot, slot + reward_width_);
  slot += reward_width_;
  t.next_global_state.assign(slot, slot + state_width_);
  return t;
}

Batch ReplayBuffer::sample(std::size_t count, RandomStream& rng) const {
  if (count == 0 || size_ < count) {
    throw std::logic_error("cannot sample " + std::to_string(count) + " transitions from a buffer of " +
                           std::to_string(size_));
  }
  const auto w = static_cast<Eigen::Index>(count);
  Batch b;
  b.states.resize(static_cast<Eigen::Index>(state_width_), w);
  b.actions.resize(static_cast<Eigen::Index>(action_width_), w);
  b.rewards.resize(static_cast<Eigen::Index>(reward_width_), w);
  b.next_states.resize(static_cast<Eigen::Index>(state_width_), w);
  using ConstVec = Eigen::Map<const Eigen::VectorXd>;
  for (Eigen::Index c = 0; c < w; ++c) {
    const double* slot = data_.data() + rng.index(size_) * stride_;
    b.states.col(c) = ConstVec(slot, static_cast<Eigen::Index>(state_width_));
    slot += state_width_;
    b.actions.col(c) = ConstVec(slot, static_cast<Eigen::Index>(action_width_));
    slot += action_width_;
    b.rewards.col(c) = ConstVec(slot, static_cast<Eigen::Index>(reward_width_));
    slot += reward_width_;
    b.next_states.col(c) = ConstVec(slot, static_cast<Eigen::Index>(state_width_));
  }
  return b;
}

Batch store_and_sample(ReplayBuffer& buffer, const Transition& transition, std::size_t count,
                       RandomStream& rng) {
  buffer.push(transition);
  return buffer.sample(count, rng);
}

// ---------------------------------------------------------------------------
// Agents and training

void TrainConfig::validate() const {
  if (episodes == 0 || steps_per_episode == 0) throw std::invalid_argument("episodes and steps must be positive");
  if (batch == 0 || buffer < batch) throw std::invalid_argument("buffer must hold at least one batch");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(delta_max_fraction > 0.0)) throw std::invalid_argument("delta_max must be positive");
  if (!(power_penalty >= 0.0)) throw std::invalid_argument("power_penalty must be non-negative");
  if (!(oversupply_penalty >= 0.0)) throw std::invalid_argument("oversupply_penalty must be non-negative");
  if (!(preact_penalty >= 0.0)) throw std::invalid_argument("preact_penalty must be non-negative");
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward_scale must be positive");
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer required");
}

AgentBundle make_agent(RandomStream& rng, const JointLayout& layout, std::size_t cluster_size,
                       const TrainConfig& config) {
  if (cluster_size == 0 || cluster_size > layout.pad_width) {
    throw std::invalid_argument("cluster size must be in [1, pad width]");
  }
  std::vector<std::size_t> actor_sizes{layout.obs_width()};
  actor_sizes.insert(actor_sizes.end(), config.hidden.begin(), config.hidden.end());
  actor_sizes.push_back(layout.pad_width);
  std::vector<std::size_t> critic_sizes{layout.critic_input()};
  critic_sizes.insert(critic_sizes.end(), config.hidden.begin(), config.hidden.end());
  critic_sizes.push_back(1);

  AgentBundle a;
  a.actor = init_params(rng, actor_sizes, Activation::tanh);
  a.critic = init_params(rng, critic_sizes, Activation::linear);
  a.target_actor = a.actor;
  a.target_critic = a.critic;
  a.actor_opt = AdamState::for_params(a.actor, config.actor_lr);
  a.critic_opt = AdamState::for_params(a.critic, config.critic_lr);
  a.mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.pad_width));
  a.mask.head(static_cast<Eigen::Index>(cluster_size)).setOnes();
  return a;
}

ActionVector select_action(const AgentBundle& agent, const Observation& obs, double noise_sigma,
                           RandomStream& rng) {
  const std::size_t m = obs.pad_width();
  Eigen::VectorXd features(static_cast<Eigen::Index>(Observation::feature_width(m)));
  obs.write_features({features.data(), static_cast<std::size_t>(features.size())});
  const Eigen::VectorXd mu = forward(agent.actor, features);
  if (static_cast<std::size_t>(mu.size()) != m) {
    throw std::invalid_argument("actor output width does not match observation");
  }
  ActionVector a;
  a.deltas.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
    a.deltas[s] = obs.mask[s] ? std::clamp(mu(static_cast<Eigen::Index>(s)) + noise, -1.0, 1.0) : 0.0;
  }
  return a;
}

namespace {

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Eigen::MatrixXd masked_policy(const MlpParams& actor, const Eigen::VectorXd& mask, const Eigen::MatrixXd& obs,
                              ForwardCache* cache) {
  Eigen::MatrixXd a = forward(actor, obs, cache);
  a.array().colwise() *= mask.array();
  return a;
}

void require_finite_loss(double v, const char* what, std::size_t agent) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string("non-finite ") + what + " for agent " + std::to_string(agent));
  }
}

}  // namespace

MlpGradients actor_loss_gradient(const std::vector<AgentBundle>& agents, std::size_t agent,
                                 const Batch& batch, const JointLayout& layout, double* objective,
                                 double preact_penalty) {
  const AgentBundle& ag = agents.at(agent);
  const auto ow = static_cast<Eigen::Index>(layout.obs_width());
  const auto m = static_cast<Eigen::Index>(layout.pad_width);
  const auto sw = static_cast<Eigen::Index>(layout.state_width());
  const auto j = static_cast<Eigen::Index>(agent);
  const double w = static_cast<double>(batch.size());

  ForwardCache actor_cache;
  const Eigen::MatrixXd own = masked_policy(ag.actor, ag.mask, batch.states.middleRows(j * ow, ow), &actor_cache);
  Eigen::MatrixXd input = stack(batch.states, batch.actions);
  input.middleRows(sw + j * m, m) = own;

  ForwardCache critic_cache;
  const Eigen::MatrixXd q = forward(ag.critic, input, &critic_cache);
  if (objective != nullptr) *objective = q.mean();
  const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, q.cols(), -1.0 / w);
  const Eigen::MatrixXd d_input = backward(ag.critic, critic_cache, dq, nullptr, true);
  Eigen::MatrixXd d_action = d_input.middleRows(sw + j * m, m);
  d_action.array().colwise() *= ag.mask.array();

  MlpGradients g = MlpGradients::zeros_like(ag.actor);
  backward(ag.actor, actor_cache, d_action, &g, false);
  if (preact_penalty > 0.0) {
    // Same weights with a linear head give the pre-activations directly.
    MlpParams linear = ag.actor;
    linear.output = Activation::linear;
    ForwardCache linear_cache;
    const Eigen::MatrixXd z = masked_policy(linear, ag.mask, batch.states.middleRows(j * ow, ow), &linear_cache);
    backward(linear, linear_cache, (2.0 * preact_penalty / w) * z, &g, false);
  }
  return g;
}

MlpGradients critic_loss_gradient(const MlpParams& critic, const Eigen::MatrixXd& input,
                                  const Eigen::RowVectorXd& targets, double* loss) {
  if (input.cols() != targets.size()) throw std::invalid_argument("one target per batch column required");
  const double w = static_cast<double>(input.cols());
  ForwardCache cache;
  const Eigen::MatrixXd diff = forward(critic, input, &cache) - targets;
  if (loss != nullptr) *loss = diff.squaredNorm() / w;
  MlpGradients g = MlpGradients::zeros_like(critic);
  backward(critic, cache, (2.0 / w) * diff, &g, false);
  return g;
}

TrainStepStats train_step(std::vector<AgentBundle>& agents, const Batch& batch, const JointLayout& layout,
                          double gamma, double tau, double preact_penalty) {
  const std::size_t k = agents.size();
  if (k != layout.agents) throw std::invalid_argument("agent count does not match layout");
  if (static_cast<std::size_t>(batch.states.rows()) != layout.state_width() ||
      static_cast<std::size_t>(batch.actions.rows()) != layout.action_width()) {
    throw std::invalid_argument("batch widths do not match layout");
  }
  const auto ow = static_cast<Eigen::Index>(layout.obs_width());
  const auto m = static_cast<Eigen::Index>(layout.pad_width);

  Eigen::MatrixXd next_actions(batch.actions.rows(), batch.actions.cols());
  for (std::size_t i = 0; i < k; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    next_actions.middleRows(ii * m, m) =
        masked_policy(agents[i].target_actor, agents[i].mask, batch.next_states.middleRows(ii * ow, ow), nullptr);
  }
  const Eigen::MatrixXd next_input = stack(batch.next_states, next_actions);
  const Eigen::MatrixXd input = stack(batch.states, batch.actions);

  TrainStepStats stats;
  stats.critic_loss.resize(k);
  stats.mean_q.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    AgentBundle& ag = agents[j];
    const Eigen::RowVectorXd y = batch.reward_for(j) + gamma * forward(ag.target_critic, next_input).row(0);

    const MlpGradients cg = critic_loss_gradient(ag.critic, input, y, &stats.critic_loss[j]);
    require_finite_loss(stats.critic_loss[j], "critic loss", j);
    adam_step(ag.critic, cg, ag.critic_opt);

    double objective = 0.0;
    const MlpGradients ag_grad = actor_loss_gradient(agents, j, batch, layout, &objective, preact_penalty);
    stats.mean_q[j] = objective;
    require_finite_loss(objective, "actor objective", j);
    adam_step(ag.actor, ag_grad, ag.actor_opt);
  }
  for (auto& ag : agents) {
    soft_update(ag.target_actor, ag.actor, tau);
    soft_update(ag.target_critic, ag.critic, tau);
  }
  return stats;
}

std::vector<double> global_state(const CoverageEnv& env, std::size_t pad_width) {
  const std::size_t ow = Observation::feature_width(pad_width);
  std::vector<double> s(env.num_clusters() * ow);
  for (std::size_t j = 0; j < env.num_clusters(); ++j) {
    env.observe(j, pad_width).write_features(std::span<double>(s).subspan(j * ow, ow));
  }
  return s;
}

std::vector<ActionVector> act_and_apply(CoverageEnv& env, const std::vector<AgentBundle>& agents,
                                        const JointLayout& layout, double noise_sigma, double delta_max,
                                        RandomStream& rng, BudgetAudit* audit) {
  const std::size_t k = env.num_clusters();
  std::vector<ActionVector> actions(k);
  PowerAllocation next;
  next.powers.resize(k);
  const double budget = env.field().power_budget;
  for (std::size_t j = 0; j < k; ++j) {
    actions[j] = select_action(agents.at(j), env.observe(j, layout.pad_width), noise_sigma, rng);
    next.powers[j] = apply_action(env.allocation().powers[j], actions[j], delta_max, env.distances(j), budget);
    if (audit != nullptr) {
      ++audit->checks;
      double total = 0.0;
      bool ok = true;
      for (double p : next.powers[j]) {
        total += p;
        if (!(p >= 0.0 && p <= budget)) ok = false;
      }
      if (!(total <= budget + 1e-9) || !ok) ++audit->violations;
    }
  }
  env.set_allocation(std::move(next));
  env.evaluate();
  return actions;
}

std::vector<double> training_rewards(const CoverageEnv& env, const TrainConfig& config, double* logged) {
  const auto& eval = env.last_evaluation();
  const double rth = env.field().rate_threshold;
  const std::size_t k = env.num_clusters();
  std::vector<double> usage(k);
  double total_usage = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    usage[j] = env.allocation().cluster_total(j) / env.field().power_budget;
    total_usage += usage[j];
  }
  auto excess = [&](std::size_t i) {
    const LinkStats& st = eval.per_ue[i];
    return st.served ? (st.rate - rth) / rth : 0.0;
  };
  double total_excess = 0.0;
  for (std::size_t i = 0; i < eval.per_ue.size(); ++i) total_excess += excess(i);
  const double network = compute_reward(eval, rth, config.reward_form).total - config.power_penalty * total_usage -
                         config.oversupply_penalty * total_excess;
  if (logged != nullptr) *logged = network;
  if (!config.per_agent_reward) return {network * config.reward_scale};
  std::vector<double> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double own = compute_cluster_reward(eval, env.assignment(), j, rth, config.reward_form).total;
    double own_excess = 0.0;
    for (std::size_t i : env.assignment().members[j]) own_excess += excess(i);
    out[j] = (own - config.power_penalty * usage[j] - config.oversupply_penalty * own_excess) * config.reward_scale;
  }
  return out;
}

TrainingOutcome run_training(CoverageEnv& env, const TrainConfig& config, RandomStream& rng,
                             const std::function<void(std::size_t, const EpisodeMetrics&)>& on_episode) {
  config.validate();
  const std::size_t k = env.num_clusters();
  const auto& sizes = env.assignment().sizes;
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  TrainingOutcome out;
  out.layout = {k, config.pad_width == 0 ? largest : config.pad_width};
  if (out.layout.pad_width < largest) {
    throw std::invalid_argument("pad width smaller than the largest cluster");
  }
  RandomStream init_rng = rng.derive(1);
  RandomStream noise_rng = rng.derive(2);
  RandomStream sample_rng = rng.derive(3);
  for (std::size_t j = 0; j < k; ++j) {
    out.agents.push_back(make_agent(init_rng, out.layout, sizes[j], config));
  }
  ReplayBuffer buffer(config.buffer, out.layout.state_width(), out.layout.action_width(),
                      config.per_agent_reward ? k : 1);
  const double delta_max = config.delta_max_fraction * env.field().power_budget;

  Transition tr;
  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    env.reset();
    tr.global_state = global_state(env, out.layout.pad_width);
    EpisodeMetrics metrics;
    for (std::size_t t = 0; t < config.steps_per_episode; ++t) {
      const auto actions = act_and_apply(env, out.agents, out.layout, config.noise_sigma, delta_max, noise_rng,
                                         &out.audit);
      double logged = 0.0;
      const auto rewards = training_rewards(env, config, &logged);
      tr.joint_action.clear();
      for (const auto& a : actions) tr.joint_action.insert(tr.joint_action.end(), a.deltas.begin(), a.deltas.end());
      tr.reward = rewards.front();
      tr.agent_rewards = rewards.size() > 1 ? rewards : std::vector<double>{};
      tr.next_global_state = global_state(env, out.layout.pad_width);
      buffer.push(tr);
      tr.global_state = tr.next_global_state;

      out.step_rewards.push_back(logged);
      metrics.mean_step_reward += logged;
      metrics.served += static_cast<double>(env.last_evaluation().total_served);
      metrics.power_fraction += env.power_fraction();

      if (buffer.size() >= config.batch) {
        train_step(out.agents, buffer.sample(config.batch, sample_rng), out.layout, config.gamma, config.tau,
                   config.preact_penalty);
        ++out.updates;
      }
    }
    const double steps = static_cast<double>(config.steps_per_episode);
    metrics.mean_step_reward /= steps;
    metrics.served /= steps;
    metrics.power_fraction /= steps;
    out.episodes.push_back(metrics);
    if (on_episode) on_episode(ep, metrics);
  }
  return out;
}

}  // namespace uavcov
