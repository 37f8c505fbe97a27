#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "uavcov/harness.hpp"

using namespace uavcov;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uavcov_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(Algorithm algo) {
  ExperimentConfig c = default_experiment();
  c.algorithm = algo;
  c.field.num_ues = 12;
  c.clusters = {3};
  c.seeds = {1, 2};
  c.train.episodes = 3;
  c.train.steps_per_episode = 10;
  c.train.batch = 8;
  c.train.hidden = {8, 8};
  c.eval_steps = 10;
  c.jobs = 1;
  return c;
}

}  // namespace

TEST_CASE("config text") {
  ExperimentConfig c = default_experiment();
  apply_config_text(c, "# comment\nK = 5, 10\nR_th = 2e7\nL = 10000,50000\nM = 7 # trailing\nalgorithm = dqn\n"
                       "H = 64,32\nseeds = 1,2,3\nfading = expected\n");
  CHECK(c.clusters == std::vector<std::size_t>{5, 10});
  CHECK(c.rate_thresholds == std::vector<double>{2e7});
  CHECK(c.side_lengths.size() == 2);
  CHECK(c.train.episodes == 7);
  CHECK(c.algorithm == Algorithm::dqn);
  CHECK(c.train.hidden == std::vector<std::size_t>{64, 32});
  CHECK(c.fading == FadingMode::expected);
  CHECK(c.points().size() == 4);
  CHECK(c.points()[1].clusters == 10);

  ExperimentConfig back = default_experiment();
  apply_config_text(back, render_config(c));
  CHECK(render_config(back) == render_config(c));

  CHECK_THROWS_AS(apply_config_text(c, "bogus = 1"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "K = five"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "no equals sign"), ConfigError);
  c.clusters = {31};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.clusters = {5};
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("aggregation") {
  const std::vector<double> same{2.5, 2.5, 2.5};
  auto a = aggregate(same);
  CHECK(a.mean == 2.5);
  CHECK(a.ci95_high - a.ci95_low == 0.0);

  const std::vector<double> two{3.0, 5.0};
  a = aggregate(two);
  CHECK(a.mean == 4.0);
  // t(0.975, 1 dof) = 12.7062; sample sd = sqrt(2).
  CHECK(a.ci95_high - a.mean == doctest::Approx(12.7062047 * std::sqrt(2.0) / std::sqrt(2.0)).epsilon(1e-6));

  const std::vector<double> one{7.0};
  a = aggregate(one);
  CHECK(a.ci95_low == 7.0);
  CHECK(a.ci95_high == 7.0);

  RandomStream rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> xs(1 + rng.index(9));
    for (auto& x : xs) x = 0.1 + 1e-17 * rng.uniform();
    a = aggregate(xs);
    CHECK(a.mean >= *std::min_element(xs.begin(), xs.end()));
    CHECK(a.mean <= *std::max_element(xs.begin(), xs.end()));
  }
}

TEST_CASE("single UE under its UAV is served") {
  ExperimentConfig c = default_experiment();
  c.algorithm = Algorithm::equal;
  c.field.num_ues = 1;
  c.clusters = {1};
  c.seeds = {4};
  c.train.episodes = 2;
  c.train.steps_per_episode = 3;
  c.eval_steps = 10;
  const auto res = run_experiment(c);
  REQUIRE(res.size() == 1);
  REQUIRE(res[0].ok);
  const double rate = oracle::shannon_rate(oracle::mean_received_power(1.0, 0.0, 500.0), 0.0, 1.0);
  CHECK(res[0].served_expected == (rate >= 30e6 ? 1.0 : 0.0));
  CHECK(res[0].served_expected == 1.0);
  CHECK(res[0].power_fraction == 1.0);
}

TEST_CASE("run bookkeeping and outputs") {
  const ExperimentConfig c = tiny(Algorithm::equal);
  const auto res = run_experiment(c);
  REQUIRE(res.size() == 2);
  CHECK(res[0].seed == 1);
  CHECK(res[1].seed == 2);
  CHECK(res[0].config_hash == res[1].config_hash);
  for (const auto& r : res) {
    CHECK(r.ok);
    CHECK(r.power_fraction == 1.0);
    CHECK(r.episodes.size() == 3);
    for (const auto& e : r.episodes) CHECK(e.power_fraction == 1.0);
  }

  const fs::path out = scratch("outputs");
  emit_outputs(res, c, out);
  const std::string csv = slurp(out / "runs" / (run_file_stem(res[0]) + ".csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("episode,mean_step_reward,served,power_fraction\n", 0) == 0);

  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  const auto& group = summary.at("groups").begin().value();
  CHECK(group.at("served").at("mean").get<double>() == doctest::Approx((res[0].served + res[1].served) / 2));
  CHECK(group.at("power_fraction").at("mean").get<double>() == 1.0);
  CHECK(group.at("power_fraction").at("ci95_low").get<double>() == 1.0);
  CHECK(slurp(out / "manifest.json").find("seeds") != std::string::npos);

  CHECK_THROWS(emit_outputs({}, c, out));
  CHECK_THROWS(ensure_writable("/proc/uavcov_cannot_exist"));
}

TEST_CASE("learning runs are deterministic and checkpoint round trip") {
  for (Algorithm algo : {Algorithm::maddpg, Algorithm::dqn}) {
    ExperimentConfig c = tiny(algo);
    c.seeds = {3};
    std::vector<TrainedPolicy> trained;
    const auto a = run_experiment(c, {}, &trained);
    const auto b = run_experiment(c);
    REQUIRE(a[0].ok);
    CHECK(a[0].served == b[0].served);
    CHECK(a[0].power_fraction == b[0].power_fraction);
    CHECK(a[0].budget_violations == 0);
    CHECK(a[0].budget_checks > 0);

    const fs::path o1 = scratch("det1"), o2 = scratch("det2");
    emit_outputs(a, c, o1);
    emit_outputs(b, c, o2);
    CHECK(slurp(o1 / "summary.json") == slurp(o2 / "summary.json"));
    CHECK(slurp(o1 / "manifest.json") == slurp(o2 / "manifest.json"));

    const fs::path ck = scratch("ckpt");
    save_checkpoints(trained[0], ck);
    const TrainedPolicy loaded = load_checkpoints(ck, algo);
    const auto e = evaluate_trained(c, c.points()[0], 3, loaded);
    REQUIRE(e.ok);
    CHECK(e.served == a[0].served);
    CHECK(e.power_fraction == a[0].power_fraction);
  }
}

TEST_CASE("failed runs are recorded") {
  ExperimentConfig c = tiny(Algorithm::maddpg);
  c.seeds = {1};
  c.train.pad_width = 1;  // smaller than any cluster of a 12-UE, 3-UAV layout
  const auto res = run_experiment(c);
  REQUIRE(res.size() == 1);
  CHECK_FALSE(res[0].ok);
  CHECK_FALSE(res[0].error.empty());
}
