#include "uavcov/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uavcov {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("non-finite ") + what);
  }
}

}  // namespace

void ChannelParams::validate() const {
  const double fields[] = {alpha_los, alpha_nlos, b_env, c_env, rice_k, mu_gain, noise_power, bandwidth};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw std::invalid_argument("channel parameters must be finite and strictly positive");
    }
  }
  if (!(alpha_nlos > alpha_los)) {
    throw std::invalid_argument("alpha_nlos must exceed alpha_los");
  }
}

LinkGeometry link_geometry(Point2 ue, Point3 uav) {
  require_finite(ue.x, "UE x");
  require_finite(ue.y, "UE y");
  require_finite(uav.x, "UAV x");
  require_finite(uav.y, "UAV y");
  require_finite(uav.z, "UAV height");
  if (!(uav.z > 0.0)) {
    throw std::invalid_argument("UAV height must be positive");
  }
  LinkGeometry g;
  g.horiz_dist = std::hypot(uav.x - ue.x, uav.y - ue.y);
  g.slant_dist = std::hypot(g.horiz_dist, uav.z);
  g.elevation = std::asin(std::min(1.0, uav.z / g.slant_dist));
  return g;
}

double los_probability(double elevation, const ChannelParams& params) {
  const double deg = elevation * (180.0 / std::numbers::pi);
  return 1.0 / (1.0 + params.c_env * std::exp(-params.b_env * (deg - params.c_env)));
}

FadingDraw sample_fading(RandomStream& rng, const ChannelParams& params, FadingMode mode) {
  if (mode == FadingMode::expected) {
    return {params.mu_gain, params.mu_gain, mode};
  }
  const double k = params.rice_k;
  const double mu = params.mu_gain;
  const double los_amp = std::sqrt(mu * k / (k + 1.0));
  const double scatter = std::sqrt(mu / (k + 1.0));
  // z ~ CN(0, 1): each quadrature has variance 1/2.
  const double re = los_amp + scatter * rng.normal() * std::numbers::sqrt2 / 2.0;
  const double im = scatter * rng.normal() * std::numbers::sqrt2 / 2.0;
  FadingDraw d;
  d.g_los = re * re + im * im;
  d.k_nlos = rng.exponential(mu);
  d.mode = mode;
  return d;
}

double effective_received_power(double p_tx, const LinkGeometry& geom, const FadingDraw& fading,
                                const ChannelParams& params) {
  if (!(p_tx >= 0.0)) {
    throw std::invalid_argument("transmit power must be non-negative");
  }
  const double p_los = los_probability(geom.elevation, params);
  const double los = p_tx * fading.g_los * std::pow(geom.slant_dist, -params.alpha_los);
  const double nlos = p_tx * fading.k_nlos * std::pow(geom.slant_dist, -params.alpha_nlos);
  return p_los * los + (1.0 - p_los) * nlos;
}

double inter_cluster_interference(Point2 ue, std::size_t own_cluster,
                                  std::span<const Point3> uav_positions,
                                  std::span<const double> avg_powers,
                                  std::span<const FadingDraw> fading_draws,
                                  const ChannelParams& params) {
  const std::size_t k = uav_positions.size();
  if (avg_powers.size() != k || fading_draws.size() != k) {
    throw std::invalid_argument("interference inputs must have one entry per UAV");
  }
  if (own_cluster >= k) {
    throw std::invalid_argument("own cluster index out of range");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    if (s == own_cluster) continue;
    if (!(avg_powers[s] >= 0.0)) {
      throw std::invalid_argument("interfering power must be non-negative");
    }
    const LinkGeometry g = link_geometry(ue, uav_positions[s]);
    total += avg_powers[s] * fading_draws[s].k_nlos * std::pow(g.slant_dist, -params.alpha_nlos);
  }
  return total;
}

double data_rate(double p_eff, double interference, std::size_t share_count,
                 const ChannelParams& params) {
  if (share_count == 0) {
    throw std::invalid_argument("share_count must be at least 1");
  }
  const double sinr = p_eff / (interference + params.noise_power);
  return params.bandwidth / static_cast<double>(share_count) * std::log2(1.0 + sinr);
}

}  // namespace uavcov
