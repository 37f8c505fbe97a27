#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "uavcov/channel.hpp"
#include "uavcov/clustering.hpp"
#include "uavcov/harness.hpp"

namespace py = pybind11;
using namespace uavcov;

namespace {

std::vector<Point2> to_points(const std::vector<std::pair<double, double>>& xy) {
  std::vector<Point2> out;
  out.reserve(xy.size());
  for (const auto& [x, y] : xy) out.push_back({x, y});
  return out;
}

py::dict stat_dict(const AggregateStat& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["ci95_low"] = s.ci95_low;
  d["ci95_high"] = s.ci95_high;
  d["n"] = s.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_uavcov, m) {
  m.doc() = "Multi-UAV coverage simulator core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "los_probability",
      [](double elevation_deg) {
        return los_probability(elevation_deg * M_PI / 180.0, ChannelParams{});
      },
      py::arg("elevation_deg"), "LoS probability at an elevation angle in degrees.");

  m.def(
      "mean_received_power",
      [](double p_tx, double horiz_dist, double height) {
        const ChannelParams params;
        RandomStream rng(0);
        const auto mean = sample_fading(rng, params, FadingMode::expected);
        return effective_received_power(p_tx, link_geometry({0, 0}, {horiz_dist, 0, height}), mean, params);
      },
      py::arg("p_tx"), py::arg("horiz_dist"), py::arg("height") = 500.0,
      "Received power in W with mean fading gains.");

  m.def(
      "data_rate",
      [](double p_eff, double interference, std::size_t share) {
        return data_rate(p_eff, interference, share, ChannelParams{});
      },
      py::arg("p_eff"), py::arg("interference") = 0.0, py::arg("share") = 1, "Achievable rate in bit/s.");

  m.def(
      "kmeans",
      [](const std::vector<std::pair<double, double>>& xy, std::size_t k, std::uint64_t seed,
         std::size_t restarts) {
        const auto pts = to_points(xy);
        RandomStream rng(seed);
        KMeansOptions opts;
        opts.restarts = restarts;
        const auto a = kmeans(pts, k, rng, opts);
        std::vector<std::pair<double, double>> centroids;
        for (const auto& c : a.centroids) centroids.emplace_back(c.x, c.y);
        py::dict d;
        d["labels"] = a.labels;
        d["centroids"] = centroids;
        d["inertia"] = a.inertia;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("restarts") = 10);

  m.def("default_config", [] { return render_config(default_experiment()); },
        "Default experiment configuration as key = value text.");

  m.def(
      "run",
      [](const std::string& config_text) {
        ExperimentConfig cfg = default_experiment();
        apply_config_text(cfg, config_text);
        cfg.validate();
        std::vector<RunSummary> runs;
        {
          py::gil_scoped_release release;
          runs = run_experiment(cfg);
        }
        py::list out;
        for (const auto& r : runs) {
          py::dict d;
          d["algorithm"] = to_string(r.algorithm);
          d["clusters"] = r.point.clusters;
          d["rate_threshold"] = r.point.rate_threshold;
          d["side_len"] = r.point.side_len;
          d["seed"] = r.seed;
          d["ok"] = r.ok;
          d["error"] = r.error;
          d["served"] = r.served;
          d["power_fraction"] = r.power_fraction;
          d["budget_checks"] = r.budget_checks;
          d["budget_violations"] = r.budget_violations;
          std::vector<double> rewards;
          for (const auto& e : r.episodes) rewards.push_back(e.mean_step_reward);
          d["episode_rewards"] = rewards;
          out.append(d);
        }
        return out;
      },
      py::arg("config_text") = "", "Runs every sweep point and seed; returns one dict per run.");

  m.def(
      "aggregate",
      [](const std::vector<double>& values) { return stat_dict(aggregate(values)); }, py::arg("values"),
      "Mean with a Student-t 95% interval.");
}
