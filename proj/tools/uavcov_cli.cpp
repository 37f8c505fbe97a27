// uavcov: train, sweep and evaluate UAV power-allocation policies.
//
//   uavcov train --clusters 5 --seeds 1 --out runs/k5
//   uavcov sweep --config exp.cfg --clusters 5,10,15 --seeds 1,2,3 --out runs/sweep
//   uavcov eval  --from runs/k5 --out runs/k5_eval

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uavcov/harness.hpp"

namespace fs = std::filesystem;
using namespace uavcov;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kBadConfig = 2;

struct Overrides {
  std::string config;
  std::string algo;
  std::vector<std::size_t> clusters;
  std::optional<std::size_t> ues;
  std::vector<double> rate_mbps;
  std::vector<double> side_m;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> jobs;
  std::string fading;
  std::string out = "uavcov_out";
  bool paper_scale = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--algo", o.algo, "maddpg | dqn | equal");
  cmd->add_option("--clusters", o.clusters, "number of UAVs K (list)")->delimiter(',');
  cmd->add_option("--ues", o.ues, "number of UEs N");
  cmd->add_option("--rate-threshold-mbps", o.rate_mbps, "rate threshold in Mbit/s (list)")->delimiter(',');
  cmd->add_option("--field-side-m", o.side_m, "field side length in m (list)")->delimiter(',');
  cmd->add_option("--seeds", o.seeds, "seed list")->delimiter(',');
  cmd->add_option("--episodes", o.episodes, "training episodes");
  cmd->add_option("--steps", o.steps, "steps per episode");
  cmd->add_option("--jobs", o.jobs, "worker threads (0: all cores)");
  cmd->add_option("--fading", o.fading, "sampled | expected");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--paper-scale", o.paper_scale, "500 episodes x 500 steps");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress lines");
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? default_experiment() : load_config_file(o.config);
  if (o.paper_scale) {
    c.train.episodes = 500;
    c.train.steps_per_episode = 500;
  }
  if (!o.algo.empty()) c.algorithm = parse_algorithm(o.algo);
  if (!o.clusters.empty()) c.clusters = o.clusters;
  if (o.ues) c.field.num_ues = *o.ues;
  if (!o.rate_mbps.empty()) {
    c.rate_thresholds.clear();
    for (double r : o.rate_mbps) c.rate_thresholds.push_back(r * 1e6);
  }
  if (!o.side_m.empty()) c.side_lengths = o.side_m;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.episodes) c.train.episodes = *o.episodes;
  if (o.steps) c.train.steps_per_episode = *o.steps;
  if (o.jobs) c.jobs = *o.jobs;
  if (!o.fading.empty()) c.fading = parse_fading(o.fading);
  c.validate();
  return c;
}

void progress(const RunSummary& s) {
  std::fprintf(stderr, "[%s K=%zu R_th=%gMbps L=%g seed=%llu] %s served=%.3f power=%.4f (%.1fs)\n",
               to_string(s.algorithm), s.point.clusters, s.point.rate_threshold / 1e6, s.point.side_len,
               static_cast<unsigned long long>(s.seed), s.ok ? "ok" : ("FAILED: " + s.error).c_str(), s.served,
               s.power_fraction, s.wall_clock_s);
}

void writable_or_reject(const fs::path& dir) {
  try {
    ensure_writable(dir);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

int finish(const std::vector<RunSummary>& results, const ExperimentConfig& config, const fs::path& out) {
  emit_outputs(results, config, out);
  for (const auto& s : results) {
    if (!s.ok) return kRunFailed;
  }
  return kOk;
}

int cmd_sweep(const Overrides& o) {
  const ExperimentConfig config = build_config(o);
  writable_or_reject(o.out);
  std::function<void(const RunSummary&)> cb;
  if (!o.quiet) cb = progress;
  return finish(run_experiment(config, cb), config, o.out);
}

int cmd_train(const Overrides& o) {
  ExperimentConfig config = build_config(o);
  if (config.points().size() != 1) throw ConfigError("train takes a single K, R_th and L");
  writable_or_reject(o.out);
  std::function<void(const RunSummary&)> cb;
  if (!o.quiet) cb = progress;
  std::vector<TrainedPolicy> trained;
  const auto results = run_experiment(config, cb, &trained);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok && results[i].algorithm != Algorithm::equal) {
      save_checkpoints(trained[i], fs::path(o.out) / "checkpoints" / ("seed" + std::to_string(results[i].seed)));
    }
  }
  std::ofstream(fs::path(o.out) / "config.cfg") << render_config(config);
  return finish(results, config, o.out);
}

int cmd_eval(const Overrides& o, const std::string& from) {
  const fs::path src(from);
  Overrides base = o;
  if (base.config.empty()) {
    base.config = (src / "config.cfg").string();
    if (!fs::exists(base.config)) throw ConfigError("no config.cfg in " + from + " and no --config given");
  }
  const ExperimentConfig config = build_config(base);
  if (config.points().size() != 1) throw ConfigError("eval takes a single K, R_th and L");
  writable_or_reject(o.out);
  const SweepPoint point = config.points().front();
  std::vector<RunSummary> results;
  for (std::uint64_t seed : config.seeds) {
    TrainedPolicy policy;
    if (config.algorithm != Algorithm::equal) {
      try {
        policy = load_checkpoints(src / "checkpoints" / ("seed" + std::to_string(seed)), config.algorithm);
      } catch (const std::exception& e) {
        RunSummary s;
        s.algorithm = config.algorithm;
        s.point = point;
        s.seed = seed;
        s.ok = false;
        s.error = e.what();
        results.push_back(s);
        if (!o.quiet) progress(s);
        continue;
      }
    } else {
      const Deployment d = deploy(config, point, seed);
      policy.layout = {d.assignment.sizes.size(), 0};
    }
    results.push_back(evaluate_trained(config, point, seed, policy));
    if (!o.quiet) progress(results.back());
  }
  return finish(results, config, o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-UAV coverage simulator with learned power allocation"};
  app.require_subcommand(1);
  Overrides o;
  std::string from;
  auto* train = app.add_subcommand("train", "train at one sweep point and save checkpoints");
  auto* sweep = app.add_subcommand("sweep", "run every (K, R_th, L, seed) combination");
  auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints");
  add_common(train, o);
  add_common(sweep, o);
  add_common(eval, o);
  eval->add_option("--from", from, "directory written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*sweep) return cmd_sweep(o);
    return cmd_eval(o, from);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
}
