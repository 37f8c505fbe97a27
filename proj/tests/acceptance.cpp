// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: uavcov_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "uavcov/channel.hpp"
#include "uavcov/clustering.hpp"
#include "uavcov/harness.hpp"
#include "uavcov/marl.hpp"

using namespace uavcov;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Channel

Verdict channel_correctness() {
  const auto t0 = Clock::now();
  const ChannelParams p;
  const double deg = oracle::kPi / 180.0;
  const double los90 = los_probability(90 * deg, p);
  const double los_c = los_probability(11.95 * deg, p);
  RandomStream rng(0);
  const auto mean = sample_fading(rng, p, FadingMode::expected);
  const double pe = effective_received_power(1.0, link_geometry({0, 0}, {0, 0, 500}), mean, p);
  const double rate = data_rate(pe, 0.0, 1, p);
  const double rate_oracle = oracle::shannon_rate(oracle::mean_received_power(1.0, 0.0, 500.0), 0.0, 1);
  const double secs = seconds_since(t0);

  const bool ok = std::abs(los90 - 0.999707) <= 1e-6 && std::abs(los_c - 1.0 / 12.95) <= 1e-6 &&
                  std::abs(rate / 1.9932e8 - 1.0) <= 1e-3 && oracle::rel_close(rate, rate_oracle, 1e-9) &&
                  secs < 1.0;
  std::ostringstream d;
  d.precision(8);
  d << "P_LoS(90)=" << los90 << " P_LoS(11.95)=" << los_c << " rate=" << rate << " b/s, " << secs << " s";
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 2. k-means against exhaustive search

Verdict kmeans_optimality() {
  const auto t0 = Clock::now();
  RandomStream rng(2024);
  int matched = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 3 + rng.index(6);
    std::vector<Point2> pts;
    std::vector<oracle::Pt> op;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 q{rng.uniform(0, 1000), rng.uniform(0, 1000)};
      pts.push_back(q);
      op.push_back({q.x, q.y});
    }
    KMeansOptions opts;
    opts.restarts = 10;
    opts.tol = 0.0;
    const double got = kmeans(pts, 2, rng, opts).inertia;
    const double best = oracle::best_two_partition_inertia(op);
    const double rel = std::abs(got - best) / std::max(best, 1e-300);
    worst = std::max(worst, rel);
    if (rel <= 1e-9) ++matched;
  }
  const double secs = seconds_since(t0);
  return {matched == 200 && secs < 10.0, std::to_string(matched) + "/200 optimal, worst rel " +
                                             fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Gradients against central differences

struct GradFixture {
  JointLayout layout;
  std::vector<AgentBundle> agents;
  Batch batch;
};

GradFixture random_fixture(RandomStream& rng) {
  TrainConfig cfg;
  cfg.hidden = {16, 12};
  GradFixture fx;
  const std::size_t k = 2 + rng.index(3);
  const std::size_t pad = 2 + rng.index(3);
  fx.layout = {k, pad};
  for (std::size_t j = 0; j < k; ++j) {
    fx.agents.push_back(make_agent(rng, fx.layout, 1 + rng.index(pad), cfg));
    for (auto* net : {&fx.agents[j].actor, &fx.agents[j].critic}) {
      for (auto& m : net->weights) m = m.unaryExpr([&](double) { return rng.uniform(-0.6, 0.6); });
      for (auto& b : net->biases) b = b.unaryExpr([&](double) { return rng.uniform(-0.2, 0.2); });
    }
  }
  const auto w = static_cast<Eigen::Index>(4 + rng.index(8));
  auto fill = [&](std::size_t rows, double lo, double hi) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), w);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
  };
  fx.batch.states = fill(fx.layout.state_width(), 0, 1);
  fx.batch.actions = fill(fx.layout.action_width(), -1, 1);
  fx.batch.rewards = fill(1, 0, 10);
  fx.batch.next_states = fill(fx.layout.state_width(), 0, 1);
  return fx;
}

// A random weight or bias of `net`, with its gradient entry.
std::pair<double*, double> pick_parameter(MlpParams& net, const MlpGradients& g, RandomStream& rng) {
  const std::size_t l = rng.index(net.num_layers());
  if (rng.uniform() < 0.7) {
    const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(net.weights[l].size())));
    return {net.weights[l].data() + i, g.weights[l].data()[i]};
  }
  const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(net.biases[l].size())));
  return {net.biases[l].data() + i, g.biases[l](i)};
}

// lambda * mean over columns of sum z^2 on real slots, from a naive copy of
// the actor with a linear head.
double naive_preact_penalty(const AgentBundle& ag, const Eigen::MatrixXd& obs, double lambda) {
  oracle::NaiveNet net;
  net.sizes = ag.actor.layer_sizes;
  for (std::size_t l = 0; l < ag.actor.num_layers(); ++l) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < ag.actor.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < ag.actor.weights[l].cols(); ++c) w.push_back(ag.actor.weights[l](r, c));
    }
    net.W.push_back(w);
    net.b.emplace_back(ag.actor.biases[l].data(), ag.actor.biases[l].data() + ag.actor.biases[l].size());
  }
  double total = 0.0;
  for (Eigen::Index col = 0; col < obs.cols(); ++col) {
    const Eigen::VectorXd o = obs.col(col);
    const auto z = net(std::vector<double>(o.data(), o.data() + o.size()));
    for (std::size_t s = 0; s < z.size(); ++s) total += ag.mask(static_cast<Eigen::Index>(s)) * z[s] * z[s];
  }
  return lambda * total / static_cast<double>(obs.cols());
}

Verdict gradient_integrity() {
  const auto t0 = Clock::now();
  RandomStream rng(31);
  std::vector<double> critic_an, critic_nu, actor_an, actor_nu;
  for (int probe = 0; probe < 100; ++probe) {
    GradFixture fx = random_fixture(rng);
    AgentBundle& ag = fx.agents[rng.index(fx.agents.size())];
    Eigen::MatrixXd input(fx.batch.states.rows() + fx.batch.actions.rows(), fx.batch.states.cols());
    input << fx.batch.states, fx.batch.actions;
    const Eigen::RowVectorXd y = fx.batch.rewards.row(0);
    const MlpGradients g = critic_loss_gradient(ag.critic, input, y);
    auto [param, analytic] = pick_parameter(ag.critic, g, rng);
    auto loss = [&] {
      double l = 0.0;
      critic_loss_gradient(ag.critic, input, y, &l);
      return l;
    };
    critic_an.push_back(analytic);
    critic_nu.push_back(oracle::central_difference(loss, *param));
  }
  for (int probe = 0; probe < 100; ++probe) {
    GradFixture fx = random_fixture(rng);
    const std::size_t j = rng.index(fx.agents.size());
    // Half of the probes include the pre-activation penalty.
    const double lambda = probe % 2 == 0 ? 0.0 : rng.uniform(0.01, 1.0);
    const auto ow = static_cast<Eigen::Index>(fx.layout.obs_width());
    const Eigen::MatrixXd obs = fx.batch.states.middleRows(static_cast<Eigen::Index>(j) * ow, ow);
    const MlpGradients g = actor_loss_gradient(fx.agents, j, fx.batch, fx.layout, nullptr, lambda);
    auto [param, analytic] = pick_parameter(fx.agents[j].actor, g, rng);
    auto loss = [&] {
      double obj = 0.0;
      actor_loss_gradient(fx.agents, j, fx.batch, fx.layout, &obj);
      return -obj + naive_preact_penalty(fx.agents[j], obs, lambda);
    };
    actor_an.push_back(analytic);
    actor_nu.push_back(oracle::central_difference(loss, *param));
  }
  const double ce = oracle::max_relative_error(critic_an, critic_nu);
  const double ae = oracle::max_relative_error(actor_an, actor_nu);
  const double secs = seconds_since(t0);
  return {ce < 1e-4 && ae < 1e-4 && secs < 30.0, "critic max rel " + fmt("%.3g", ce) + ", actor max rel " +
                                                     fmt("%.3g", ae) + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// Training experiments

ExperimentConfig base_config() {
  ExperimentConfig c = default_experiment();
  c.field.num_ues = 30;
  c.train.episodes = 100;
  c.train.steps_per_episode = 200;
  c.jobs = 0;
  return c;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = first + i;
  return s;
}

void progress(const RunSummary& r) {
  std::fprintf(stderr, "  [%s K=%zu L=%g seed=%llu] served %.2f power %.4f %s(%.0f s)\n", to_string(r.algorithm),
               r.point.clusters, r.point.side_len, static_cast<unsigned long long>(r.seed), r.served,
               r.power_fraction, r.ok ? "" : "FAILED ", r.wall_clock_s);
}

// 4. Budget feasibility over one full training run.
Verdict budget_feasibility() {
  ExperimentConfig c = base_config();
  c.clusters = {5};
  c.seeds = {1};
  const RunSummary r = run_single(c, c.points().front(), 1);
  const bool ok = r.ok && r.budget_checks > 0 && r.budget_violations == 0;
  return {ok, std::to_string(r.budget_checks - r.budget_violations) + "/" + std::to_string(r.budget_checks) +
                  " allocations within budget" + (r.ok ? "" : ", run failed: " + r.error)};
}

// 5. Reward improves from the first 10% to the last 20% of episodes.
Verdict convergence() {
  ExperimentConfig c = base_config();
  c.clusters = {3, 5, 7};
  c.seeds = seed_range(1, 10);
  const auto runs = run_experiment(c, progress);
  std::map<std::size_t, int> improved;
  bool all_ok = true;
  for (const auto& r : runs) {
    if (!r.ok) {
      all_ok = false;
      continue;
    }
    const std::size_t m = r.episodes.size();
    const std::size_t head = std::max<std::size_t>(1, m / 10);
    const std::size_t tail = std::max<std::size_t>(1, m / 5);
    double first = 0.0, last = 0.0;
    for (std::size_t e = 0; e < head; ++e) first += r.episodes[e].mean_step_reward / static_cast<double>(head);
    for (std::size_t e = m - tail; e < m; ++e) last += r.episodes[e].mean_step_reward / static_cast<double>(tail);
    if (last > first) ++improved[r.point.clusters];
  }
  bool ok = all_ok;
  std::string detail;
  for (std::size_t k : c.clusters) {
    ok = ok && improved[k] >= 8;
    detail += "K=" + std::to_string(k) + ": " + std::to_string(improved[k]) + "/10  ";
  }
  return {ok, detail + (all_ok ? "" : "(failed runs present)")};
}

// Runs shared by criteria 6-8, keyed by (algorithm, K, L). They are written
// with emit_outputs so separate processes can reuse them.
struct SeedResult {
  bool ok = false;
  double served = 0.0;
  double power_fraction = 0.0;
};

struct SweepTable {
  std::map<std::tuple<std::string, std::size_t, double>, std::vector<SeedResult>> runs;

  const std::vector<SeedResult>* find(Algorithm a, std::size_t k, double l) const {
    const auto it = runs.find({to_string(a), k, l});
    return it == runs.end() ? nullptr : &it->second;
  }

  double mean(Algorithm a, std::size_t k, double l, double SeedResult::*field) const {
    const auto* rs = find(a, k, l);
    if (rs == nullptr || rs->empty()) return std::nan("");
    double s = 0.0;
    for (const auto& r : *rs) {
      if (!r.ok) return std::nan("");
      s += r.*field;
    }
    return s / static_cast<double>(rs->size());
  }
};

constexpr std::size_t kSweepSeeds = 3;

SweepTable load_table(const fs::path& dir) {
  SweepTable table;
  if (!fs::exists(dir)) return table;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().filename() != "summary.json") continue;
    std::ifstream in(e.path());
    const auto doc = nlohmann::json::parse(in);
    for (const auto& [key, g] : doc.at("groups").items()) {
      auto& slot = table.runs[{g.at("algorithm").get<std::string>(), g.at("K").get<std::size_t>(),
                               g.at("L").get<double>()}];
      for (const auto& s : g.at("per_seed")) {
        slot.push_back({s.at("ok").get<bool>(), s.at("served").get<double>(), s.at("power_fraction").get<double>()});
      }
    }
  }
  return table;
}

// Trains every group criteria 6-8 need and writes one output tree per group.
void run_sweeps(const fs::path& dir) {
  auto add = [&](Algorithm a, std::vector<std::size_t> ks, double l) {
    ExperimentConfig c = base_config();
    c.algorithm = a;
    c.clusters = std::move(ks);
    c.side_lengths = {l};
    c.seeds = seed_range(1, kSweepSeeds);
    const auto runs = run_experiment(c, progress);
    emit_outputs(runs, c, dir / (std::string(to_string(a)) + "_L" + std::to_string(static_cast<long>(l))));
  };
  fs::remove_all(dir);
  add(Algorithm::maddpg, {5, 10, 15, 20, 25}, 10000.0);
  add(Algorithm::maddpg, {5, 10, 15}, 50000.0);
  add(Algorithm::dqn, {5, 10}, 10000.0);
  add(Algorithm::equal, {5, 10, 15, 20, 25}, 10000.0);
}

// 6. MADDPG against the baselines.
Verdict baseline_ordering(const SweepTable& t) {
  bool ok = true;
  std::string detail;
  for (std::size_t k : {5, 10}) {
    const double m = t.mean(Algorithm::maddpg, k, 10000.0, &SeedResult::served);
    const double e = t.mean(Algorithm::equal, k, 10000.0, &SeedResult::served);
    const double d = t.mean(Algorithm::dqn, k, 10000.0, &SeedResult::served);
    ok = ok && m >= e && m >= d - 1.0;
    detail += "K=" + std::to_string(k) + " maddpg " + fmt("%.2f", m) + " equal " + fmt("%.2f", e) + " dqn " +
              fmt("%.2f", d) + "  ";
  }
  const auto* m5 = t.find(Algorithm::maddpg, 5, 10000.0);
  return {ok, detail + "(" + std::to_string(m5 == nullptr ? 0 : m5->size()) + " seeds)"};
}

// 7. Power usage falls as clusters shrink.
Verdict power_trend(const SweepTable& t) {
  const std::vector<std::size_t> ks{5, 10, 15, 20, 25};
  std::vector<double> frac;
  std::string detail = "maddpg";
  bool equal_full = true;
  for (std::size_t k : ks) {
    frac.push_back(t.mean(Algorithm::maddpg, k, 10000.0, &SeedResult::power_fraction));
    detail += " " + fmt("%.4f", frac.back());
    const auto* eq = t.find(Algorithm::equal, k, 10000.0);
    if (eq == nullptr || eq->empty()) {
      equal_full = false;
      continue;
    }
    for (const auto& r : *eq) equal_full = equal_full && r.ok && r.power_fraction == 1.0;
  }
  bool ok = equal_full && frac.front() >= 5.0 * frac.back();
  for (std::size_t i = 1; i < frac.size(); ++i) ok = ok && frac[i] < frac[i - 1];
  return {ok, detail + ", equal at 100%: " + (equal_full ? "yes" : "no")};
}

// 8. Smaller fields serve at least as many UEs.
Verdict cell_scale(const SweepTable& t) {
  bool ok = true;
  std::string detail;
  for (std::size_t k : {5, 10, 15}) {
    const double small = t.mean(Algorithm::maddpg, k, 10000.0, &SeedResult::served);
    const double large = t.mean(Algorithm::maddpg, k, 50000.0, &SeedResult::served);
    ok = ok && small >= large;
    detail += "K=" + std::to_string(k) + " " + fmt("%.2f", small) + " vs " + fmt("%.2f", large) + "  ";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 9. Two sweeps from the CLI give identical files.

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

Verdict reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "uavcov_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string common = std::string(UAVCOV_CLI_PATH) +
                             " sweep -q --algo maddpg --clusters 2 3 --seeds 1 2 --episodes 3 --steps 20 --out ";
  const int a = std::system((common + (dir / "a").string() + " --jobs 1").c_str());
  const int b = std::system((common + (dir / "b").string() + " --jobs 2").c_str());
  if (a != 0 || b != 0) return {false, "sweep exit codes " + std::to_string(a) + ", " + std::to_string(b)};
  const auto ta = read_tree(dir / "a"), tb = read_tree(dir / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) ++differing;
  }
  const bool ok = !ta.empty() && ta.size() == tb.size() && differing == 0;
  fs::remove_all(dir);
  return {ok, std::to_string(ta.size()) + " files, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  // Arguments: criterion numbers, "sweep" to (re)build the shared runs, and
  // "--runs DIR" for where they live.
  std::set<int> wanted;
  bool sweep = false;
  fs::path runs_dir = fs::temp_directory_path() / "uavcov_acceptance_runs";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--runs" && i + 1 < argc) {
      runs_dir = argv[++i];
    } else if (arg == "sweep") {
      sweep = true;
    } else {
      wanted.insert(std::atoi(arg.c_str()));
    }
  }
  if (wanted.empty() && !sweep) {
    wanted = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    sweep = true;
  }

  int failures = 0;
  if (sweep) {
    const auto t0 = Clock::now();
    try {
      run_sweeps(runs_dir);
      std::printf("shared runs written to %s  [%.1f s]\n", runs_dir.c_str(), seconds_since(t0));
    } catch (const std::exception& e) {
      std::printf("shared runs FAILED  %s\n", e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  SweepTable table;
  if (wanted.count(6) || wanted.count(7) || wanted.count(8)) table = load_table(runs_dir);

  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
      {1, {"channel correctness", channel_correctness}},
      {2, {"k-means optimality", kmeans_optimality}},
      {3, {"gradient integrity", gradient_integrity}},
      {4, {"budget feasibility", budget_feasibility}},
      {5, {"training convergence", convergence}},
      {6, {"baseline ordering", [&] { return baseline_ordering(table); }}},
      {7, {"power-usage trend", [&] { return power_trend(table); }}},
      {8, {"cell-scale effect", [&] { return cell_scale(table); }}},
      {9, {"reproducibility", reproducibility}},
  };

  for (int n : wanted) {
    const auto it = criteria.find(n);
    if (it == criteria.end()) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("criterion %d %-22s %s  %s  [%.1f s]\n", n, it->second.first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
