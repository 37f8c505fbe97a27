#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "uavcov/channel.hpp"

using namespace uavcov;

TEST_CASE("link geometry") {
  auto g = link_geometry({0, 0}, {0, 0, 500});
  CHECK(g.horiz_dist == 0.0);
  CHECK(g.slant_dist == doctest::Approx(500.0));
  CHECK(g.elevation == doctest::Approx(oracle::kPi / 2));

  g = link_geometry({0, 0}, {300, 400, 500});
  CHECK(g.horiz_dist == doctest::Approx(500.0));
  CHECK(g.slant_dist == doctest::Approx(std::sqrt(500.0 * 500 + 500.0 * 500)));
  CHECK(g.elevation == doctest::Approx(oracle::kPi / 4));

  g = link_geometry({0, 0}, {10000, 0, 500});
  CHECK(g.slant_dist == doctest::Approx(std::hypot(10000.0, 500.0)).epsilon(1e-12));
  CHECK(g.elevation == doctest::Approx(std::atan(500.0 / 10000.0)).epsilon(1e-12));
  CHECK(g.slant_dist * g.slant_dist ==
        doctest::Approx(g.horiz_dist * g.horiz_dist + 500.0 * 500.0).epsilon(1e-9));
}

TEST_CASE("LoS probability") {
  const ChannelParams p;
  const double deg = oracle::kPi / 180.0;
  CHECK(los_probability(11.95 * deg, p) == doctest::Approx(1.0 / 12.95).epsilon(1e-12));
  CHECK(los_probability(90 * deg, p) == doctest::Approx(oracle::los_probability_deg(90)).epsilon(1e-12));
  CHECK(std::abs(los_probability(90 * deg, p) - 0.999707) < 1e-6);
  CHECK(los_probability(1e-12, p) == doctest::Approx(oracle::los_probability_deg(0)).epsilon(1e-9));
  CHECK(std::abs(los_probability(1e-12, p) - 0.016212) < 1e-5);
  for (double t = 0.01; t < oracle::kPi / 2; t += 0.01) {
    const double v = los_probability(t, p);
    CHECK((v > 0.0 && v <= 1.0));
    CHECK(v == doctest::Approx(oracle::los_probability_deg(t / deg)).epsilon(1e-12));
  }
}

TEST_CASE("fading draws") {
  const ChannelParams p;
  RandomStream rng(7);
  const auto e = sample_fading(rng, p, FadingMode::expected);
  CHECK(e.g_los == 0.5);
  CHECK(e.k_nlos == 0.5);

  double sg = 0, sk = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_fading(rng, p, FadingMode::sampled);
    REQUIRE(d.g_los >= 0.0);
    REQUIRE(d.k_nlos >= 0.0);
    sg += d.g_los;
    sk += d.k_nlos;
  }
  CHECK(std::abs(sg / n - 0.5) < 0.005);
  CHECK(std::abs(sk / n - 0.5) < 0.005);

  ChannelParams stiff = p;
  stiff.rice_k = 1e9;
  for (int i = 0; i < 1000; ++i) CHECK(std::abs(sample_fading(rng, stiff, FadingMode::sampled).g_los - 0.5) < 1e-3);
}

TEST_CASE("effective power and rate") {
  const ChannelParams p;
  RandomStream rng(1);
  const auto mean = sample_fading(rng, p, FadingMode::expected);
  const auto g = link_geometry({0, 0}, {0, 0, 500});
  const double pe = effective_received_power(1.0, g, mean, p);
  CHECK(oracle::rel_close(pe, oracle::mean_received_power(1.0, 0.0, 500.0), 1e-12));
  CHECK(oracle::rel_close(pe, 3.9988e-9, 1e-4));
  CHECK(effective_received_power(0.0, g, mean, p) == 0.0);
  const auto far = link_geometry({0, 0}, {3000, 1000, 500});
  CHECK(oracle::rel_close(effective_received_power(0.8, far, mean, p),
                          2.0 * effective_received_power(0.4, far, mean, p), 1e-14));
  for (double dist : {100.0, 300.0, 2000.0, 9000.0}) {
    const auto gd = link_geometry({0, 0}, {dist, 0, 500});
    CHECK(oracle::rel_close(effective_received_power(1.0, gd, mean, p), oracle::mean_received_power(1.0, dist, 500.0),
                            1e-12));
  }

  const double r = data_rate(pe, 0.0, 1, p);
  CHECK(r == doctest::Approx(oracle::shannon_rate(pe, 0.0, 1)).epsilon(1e-12));
  CHECK(r == doctest::Approx(1.9932e8).epsilon(1e-3));
  CHECK(data_rate(0.0, 0.0, 1, p) == 0.0);
  CHECK(data_rate(pe, 1e-12, 2, p) == doctest::Approx(data_rate(pe, 1e-12, 1, p) / 2).epsilon(1e-14));
  CHECK(data_rate(1e-12, 3e-15, 3, p) == doctest::Approx(oracle::shannon_rate(1e-12, 3e-15, 3)).epsilon(1e-12));
  CHECK_THROWS_AS(data_rate(pe, 0.0, 0, p), std::invalid_argument);
}

TEST_CASE("inter-cluster interference") {
  const ChannelParams p;
  RandomStream rng(1);
  const auto m = sample_fading(rng, p, FadingMode::expected);
  const Point2 ue{0, 0};

  std::vector<Point3> one{{0, 0, 500}};
  std::vector<double> pw{1.0};
  std::vector<FadingDraw> fd{m};
  CHECK(inter_cluster_interference(ue, 0, one, pw, fd, p) == 0.0);

  // Interferer at slant distance 1000 m.
  const double d = std::sqrt(1000.0 * 1000.0 - 500.0 * 500.0);
  std::vector<Point3> two{{0, 0, 500}, {d, 0, 500}};
  pw = {1.0, 0.5};
  fd = {m, m};
  const double got = inter_cluster_interference(ue, 0, two, pw, fd, p);
  CHECK(oracle::rel_close(got, oracle::nlos_interference(0.5, d, 500.0), 1e-12));
  CHECK(oracle::rel_close(got, 0.5 * 0.5 * 1e-12, 1e-12));

  std::vector<Point3> three{{0, 0, 500}, {2000, 0, 500}, {0, 3500, 500}};
  pw = {1.0, 0.3, 0.7};
  fd = {m, m, m};
  const double brute = oracle::nlos_interference(0.3, 2000, 500) + oracle::nlos_interference(0.7, 3500, 500);
  CHECK(oracle::rel_close(inter_cluster_interference(ue, 0, three, pw, fd, p), brute, 1e-12));

  pw = {1.0};
  CHECK_THROWS_AS(inter_cluster_interference(ue, 0, three, pw, fd, p), std::invalid_argument);
}

TEST_CASE("channel parameter validation") {
  ChannelParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha_nlos = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.noise_power = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
