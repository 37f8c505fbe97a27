#include "uavcov/harness.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace uavcov {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Stream tags under a run's master seed.
constexpr std::uint64_t kUeStream = 1;
constexpr std::uint64_t kClusterStream = 2;
constexpr std::uint64_t kFadingStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kEvalFadingStream = 5;

// Reported fractions are rounded to 12 decimals so that an exactly full budget
// reads as 1 despite summation rounding.
double report(double v) { return std::round(v * 1e12) / 1e12; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

double tail_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, (xs.size() + 9) / 10);
  double s = 0.0;
  for (std::size_t i = xs.size() - tail; i < xs.size(); ++i) s += xs[i];
  return s / static_cast<double>(tail);
}

std::function<void(CoverageEnv&)> make_policy(const ExperimentConfig& config, const TrainedPolicy& trained,
                                              BudgetAudit& audit, RandomStream& quiet) {
  const double delta_max = config.train.delta_max_fraction * config.field.power_budget;
  switch (config.algorithm) {
    case Algorithm::maddpg:
      return [&, delta_max](CoverageEnv& env) {
        act_and_apply(env, trained.agents, trained.layout, 0.0, delta_max, quiet, &audit);
      };
    case Algorithm::dqn:
      return [&, delta_max](CoverageEnv& env) {
        const std::vector<double> s = global_state(env, trained.layout.pad_width);
        const Eigen::Map<const Eigen::VectorXd> state(s.data(), static_cast<Eigen::Index>(s.size()));
        apply_dqn_action(env, dqn_select_action(trained.dqn->qnet, state, 0.0, quiet), delta_max, &audit);
      };
    case Algorithm::equal:
      break;
  }
  return [](CoverageEnv& env) { env.evaluate(); };
}

void evaluate_into(RunSummary& s, const ExperimentConfig& config, const SweepPoint& point, CoverageEnv& env,
                   const TrainedPolicy& trained) {
  BudgetAudit audit;
  RandomStream quiet(0);
  const auto policy = make_policy(config, trained, audit, quiet);
  env.set_fading_mode(FadingMode::expected);
  const PolicyEvaluation expected = evaluate_policy(env, config.eval_steps, policy);
  env.set_fading_mode(FadingMode::sampled);
  env.reseed_fading(RandomStream(s.seed).derive(kEvalFadingStream).derive(point.clusters));
  const PolicyEvaluation sampled = evaluate_policy(env, config.eval_steps, policy);
  s.served_expected = expected.final_served;
  s.served_sampled = sampled.final_served;
  s.power_fraction_expected = expected.final_power_fraction;
  s.power_fraction_sampled = sampled.final_power_fraction;
  const bool use_sampled = config.fading == FadingMode::sampled;
  s.served = use_sampled ? s.served_sampled : s.served_expected;
  s.power_fraction = use_sampled ? s.power_fraction_sampled : s.power_fraction_expected;
  s.budget_checks += audit.checks;
  s.budget_violations += audit.violations;
}

RunSummary blank_summary(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed) {
  RunSummary s;
  s.algorithm = config.algorithm;
  s.point = point;
  s.seed = seed;
  s.config_hash = config.config_hash(point);
  s.num_ues = config.field.num_ues;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (clusters.empty() || rate_thresholds.empty() || side_lengths.empty()) {
    throw ConfigError("sweep axes must be non-empty");
  }
  if (seeds.empty()) throw ConfigError("at least one seed required");
  if (eval_steps == 0) throw ConfigError("eval_steps must be positive");
  try {
    channel.validate();
    train.validate();
    dqn.validate();
    for (const auto& p : points()) {
      const FieldConfig f = field_at(p);
      f.validate();
      if (f.num_ues > f.grid_dim * f.grid_dim) throw ConfigError("more UEs than grid cells");
      if (p.clusters == 0 || p.clusters > f.num_ues) throw ConfigError("K must lie in [1, N]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<SweepPoint> ExperimentConfig::points() const {
  std::vector<SweepPoint> out;
  for (double l : side_lengths) {
    for (double r : rate_thresholds) {
      for (std::size_t k : clusters) out.push_back({k, r, l});
    }
  }
  return out;
}

FieldConfig ExperimentConfig::field_at(const SweepPoint& p) const {
  FieldConfig f = field;
  f.rate_threshold = p.rate_threshold;
  f.side_len = p.side_len;
  return f;
}

std::string ExperimentConfig::canonical(const SweepPoint& p) const {
  ExperimentConfig c = *this;
  c.clusters = {p.clusters};
  c.rate_thresholds = {p.rate_threshold};
  c.side_lengths = {p.side_len};
  c.seeds.clear();
  return render_config(c);
}

std::uint64_t ExperimentConfig::config_hash(const SweepPoint& p) const { return fnv1a(canonical(p)); }

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.train.per_agent_reward = true;
  c.train.power_penalty = 1.25;
  c.train.reward_scale = 0.02;
  c.train.preact_penalty = 1e-3;
  return c;
}

// ---------------------------------------------------------------------------
// Runs

Deployment deploy(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed) {
  const RandomStream master(seed);
  const FieldConfig field = config.field_at(point);
  Deployment d;
  RandomStream ue_rng = master.derive(kUeStream);
  d.ues = generate_ues(ue_rng, field);
  RandomStream km_rng = master.derive(kClusterStream).derive(point.clusters);
  KMeansOptions opts;
  opts.tol = 1e-4 * field.side_len;
  d.assignment = kmeans(d.ues, point.clusters, km_rng, opts);
  return d;
}

CoverageEnv make_environment(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                             const Deployment& deployment) {
  return CoverageEnv(deployment.ues, deployment.assignment, config.channel, config.field_at(point), config.fading,
                     RandomStream(seed).derive(kFadingStream).derive(point.clusters), config.interference);
}

PolicyEvaluation evaluate_policy(CoverageEnv& env, std::size_t steps,
                                 const std::function<void(CoverageEnv&)>& policy) {
  PolicyEvaluation ev;
  env.reset();
  for (std::size_t t = 0; t < steps; ++t) {
    policy(env);
    ev.served.push_back(static_cast<double>(env.last_evaluation().total_served));
    ev.power_fraction.push_back(report(env.power_fraction()));
  }
  ev.final_served = tail_mean(ev.served);
  ev.final_power_fraction = report(tail_mean(ev.power_fraction));
  return ev;
}

RunSummary run_single(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                      TrainedPolicy* trained) {
  RunSummary s = blank_summary(config, point, seed);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Deployment d = deploy(config, point, seed);
    CoverageEnv env = make_environment(config, point, seed, d);
    RandomStream train_rng = RandomStream(seed).derive(kTrainStream);
    TrainedPolicy local;
    TrainedPolicy& policy = trained != nullptr ? *trained : local;
    switch (config.algorithm) {
      case Algorithm::maddpg: {
        TrainingOutcome out = run_training(env, config.train, train_rng);
        s.episodes = std::move(out.episodes);
        s.budget_checks = out.audit.checks;
        s.budget_violations = out.audit.violations;
        policy.layout = out.layout;
        policy.agents = std::move(out.agents);
        break;
      }
      case Algorithm::dqn: {
        DqnConfig dc = config.dqn;
        dc.train = config.train;
        DqnOutcome out = run_dqn_training(env, dc, train_rng);
        s.episodes = std::move(out.episodes);
        s.budget_checks = out.audit.checks;
        s.budget_violations = out.audit.violations;
        policy.layout = out.layout;
        policy.dqn = std::move(out.agent);
        break;
      }
      case Algorithm::equal: {
        // Static policy rolled out on the training schedule for a comparable series.
        for (std::size_t ep = 0; ep < config.train.episodes; ++ep) {
          env.reset();
          EpisodeMetrics m;
          for (std::size_t t = 0; t < config.train.steps_per_episode; ++t) {
            env.evaluate();
            double logged = 0.0;
            training_rewards(env, config.train, &logged);
            m.mean_step_reward += logged;
            m.served += static_cast<double>(env.last_evaluation().total_served);
            m.power_fraction += env.power_fraction();
          }
          const double steps = static_cast<double>(config.train.steps_per_episode);
          m.mean_step_reward /= steps;
          m.served /= steps;
          m.power_fraction = report(m.power_fraction / steps);
          s.episodes.push_back(m);
        }
        const auto& sizes = d.assignment.sizes;
        policy.layout = {sizes.size(), *std::max_element(sizes.begin(), sizes.end())};
        break;
      }
    }
    evaluate_into(s, config, point, env, policy);
  } catch (const std::exception& e) {
    s.ok = false;
    s.error = e.what();
  }
  s.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

RunSummary evaluate_trained(const ExperimentConfig& config, const SweepPoint& point, std::uint64_t seed,
                            const TrainedPolicy& trained) {
  RunSummary s = blank_summary(config, point, seed);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Deployment d = deploy(config, point, seed);
    CoverageEnv env = make_environment(config, point, seed, d);
    if (config.algorithm == Algorithm::maddpg && trained.agents.size() != env.num_clusters()) {
      throw std::runtime_error("checkpoint agent count does not match the deployment");
    }
    if (config.algorithm == Algorithm::dqn && !trained.dqn) {
      throw std::runtime_error("missing DQN checkpoint");
    }
    evaluate_into(s, config, point, env, trained);
  } catch (const std::exception& e) {
    s.ok = false;
    s.error = e.what();
  }
  s.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& config,
                                       const std::function<void(const RunSummary&)>& on_done,
                                       std::vector<TrainedPolicy>* trained) {
  config.validate();
  const auto points = config.points();
  struct Job {
    SweepPoint point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& p : points) {
    for (std::uint64_t seed : config.seeds) jobs.push_back({p, seed});
  }
  std::vector<RunSummary> results(jobs.size());
  if (trained != nullptr) trained->assign(jobs.size(), {});

  std::size_t workers = config.jobs != 0 ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = run_single(config, jobs[i].point, jobs[i].seed, trained != nullptr ? &(*trained)[i] : nullptr);
      if (on_done) {
        std::lock_guard<std::mutex> lock(done_mutex);
        on_done(results[i]);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

AggregateStat aggregate(std::span<const double> values) {
  AggregateStat a;
  a.n = values.size();
  if (values.empty()) return a;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.n);
  a.mean = std::clamp(mean, *lo, *hi);
  a.ci95_low = a.ci95_high = a.mean;
  if (a.n < 2 || *lo == *hi) return a;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  const double sd = std::sqrt(ss / static_cast<double>(a.n - 1));
  const boost::math::students_t dist(static_cast<double>(a.n - 1));
  const double half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(a.n));
  a.ci95_low = a.mean - half;
  a.ci95_high = a.mean + half;
  return a;
}

// ---------------------------------------------------------------------------
// Outputs

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) throw std::runtime_error("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

std::string run_file_stem(const RunSummary& s) {
  return std::string(to_string(s.algorithm)) + "_K" + std::to_string(s.point.clusters) + "_Rth" +
         compact(s.point.rate_threshold / 1e6) + "Mbps_L" + compact(s.point.side_len) + "_seed" +
         std::to_string(s.seed);
}

namespace {

json stat_json(const AggregateStat& a) {
  return json{{"mean", a.mean}, {"ci95_low", a.ci95_low}, {"ci95_high", a.ci95_high}};
}

std::string group_key(const RunSummary& s) {
  return std::string(to_string(s.algorithm)) + "|K=" + std::to_string(s.point.clusters) +
         "|R_th=" + compact(s.point.rate_threshold) + "|L=" + compact(s.point.side_len);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace

void emit_outputs(const std::vector<RunSummary>& summaries, const ExperimentConfig& config, const fs::path& out_dir) {
  if (summaries.empty()) throw std::invalid_argument("nothing to emit");
  ensure_writable(out_dir / "runs");

  for (const auto& s : summaries) {
    std::ostringstream csv;
    csv << "episode,mean_step_reward,served,power_fraction\n";
    for (std::size_t e = 0; e < s.episodes.size(); ++e) {
      const auto& m = s.episodes[e];
      csv << e << ',' << num(m.mean_step_reward) << ',' << num(m.served) << ',' << num(m.power_fraction) << '\n';
    }
    write_text(out_dir / "runs" / (run_file_stem(s) + ".csv"), csv.str());
  }

  json groups = json::object();
  std::vector<std::string> order;
  std::vector<std::vector<const RunSummary*>> members;
  for (const auto& s : summaries) {
    const std::string key = group_key(s);
    auto it = std::find(order.begin(), order.end(), key);
    if (it == order.end()) {
      order.push_back(key);
      members.emplace_back();
      it = order.end() - 1;
    }
    members[static_cast<std::size_t>(it - order.begin())].push_back(&s);
  }
  for (std::size_t g = 0; g < order.size(); ++g) {
    std::vector<double> served, power, served_e, served_s;
    json per_seed = json::array();
    std::size_t failed = 0;
    for (const RunSummary* s : members[g]) {
      per_seed.push_back({{"seed", s->seed},
                          {"ok", s->ok},
                          {"served", s->served},
                          {"power_fraction", s->power_fraction},
                          {"served_expected", s->served_expected},
                          {"served_sampled", s->served_sampled},
                          {"config_hash", hex(s->config_hash)}});
      if (!s->ok) {
        ++failed;
        continue;
      }
      served.push_back(s->served);
      power.push_back(s->power_fraction);
      served_e.push_back(s->served_expected);
      served_s.push_back(s->served_sampled);
    }
    const RunSummary& first = *members[g].front();
    groups[order[g]] = {{"algorithm", to_string(first.algorithm)},
                        {"K", first.point.clusters},
                        {"R_th", first.point.rate_threshold},
                        {"L", first.point.side_len},
                        {"runs", members[g].size()},
                        {"failed", failed},
                        {"served", stat_json(aggregate(served))},
                        {"power_fraction", stat_json(aggregate(power))},
                        {"served_expected", stat_json(aggregate(served_e))},
                        {"served_sampled", stat_json(aggregate(served_s))},
                        {"per_seed", per_seed}};
  }
  write_text(out_dir / "summary.json", json{{"groups", groups}}.dump(2) + "\n");

  json runs = json::array();
  for (const auto& s : summaries) {
    runs.push_back({{"file", "runs/" + run_file_stem(s) + ".csv"},
                    {"algorithm", to_string(s.algorithm)},
                    {"K", s.point.clusters},
                    {"R_th", s.point.rate_threshold},
                    {"L", s.point.side_len},
                    {"seed", s.seed},
                    {"config_hash", hex(s.config_hash)},
                    {"ok", s.ok},
                    {"error", s.error},
                    {"episodes", s.episodes.size()},
                    {"budget_checks", s.budget_checks},
                    {"budget_violations", s.budget_violations}});
  }
  json manifest = {{"config", render_config(config)},
                   {"seeds", config.seeds},
                   {"episodes", config.train.episodes},
                   {"steps_per_episode", config.train.steps_per_episode},
                   {"runs", runs}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void save_checkpoints(const TrainedPolicy& trained, const fs::path& dir) {
  ensure_writable(dir);
  auto save = [&](const MlpParams& p, const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + (dir / name).string());
    save_params(out, p);
  };
  json layout = {{"agents", trained.layout.agents}, {"pad_width", trained.layout.pad_width}};
  if (trained.dqn) {
    save(trained.dqn->qnet, "qnet.bin");
    save(trained.dqn->target, "qnet_target.bin");
  }
  json sizes = json::array();
  for (std::size_t j = 0; j < trained.agents.size(); ++j) {
    const auto& a = trained.agents[j];
    const std::string stem = "agent" + std::to_string(j);
    save(a.actor, stem + "_actor.bin");
    save(a.critic, stem + "_critic.bin");
    save(a.target_actor, stem + "_target_actor.bin");
    save(a.target_critic, stem + "_target_critic.bin");
    sizes.push_back(static_cast<std::size_t>(a.mask.sum()));
  }
  layout["cluster_sizes"] = sizes;
  write_text(dir / "layout.json", layout.dump(2) + "\n");
}

TrainedPolicy load_checkpoints(const fs::path& dir, Algorithm algorithm) {
  std::ifstream lin(dir / "layout.json");
  if (!lin) throw std::runtime_error("missing layout.json in " + dir.string());
  const json layout = json::parse(lin);
  TrainedPolicy t;
  t.layout.agents = layout.at("agents").get<std::size_t>();
  t.layout.pad_width = layout.at("pad_width").get<std::size_t>();
  auto load = [&](const std::string& name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw std::runtime_error("missing checkpoint " + (dir / name).string());
    return load_params(in);
  };
  if (algorithm == Algorithm::dqn) {
    DqnAgent a;
    a.qnet = load("qnet.bin");
    a.target = load("qnet_target.bin");
    t.dqn = std::move(a);
  } else if (algorithm == Algorithm::maddpg) {
    const auto sizes = layout.at("cluster_sizes").get<std::vector<std::size_t>>();
    for (std::size_t j = 0; j < t.layout.agents; ++j) {
      const std::string stem = "agent" + std::to_string(j);
      AgentBundle a;
      a.actor = load(stem + "_actor.bin");
      a.critic = load(stem + "_critic.bin");
      a.target_actor = load(stem + "_target_actor.bin");
      a.target_critic = load(stem + "_target_critic.bin");
      a.mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.layout.pad_width));
      a.mask.head(static_cast<Eigen::Index>(sizes.at(j))).setOnes();
      t.agents.push_back(std::move(a));
    }
  }
  return t;
}

}  // namespace uavcov
