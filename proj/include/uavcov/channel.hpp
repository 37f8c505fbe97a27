#pragma once

// Air-to-ground propagation and downlink rate model.

#include <cstddef>
#include <span>

#include "uavcov/random.hpp"

namespace uavcov {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Propagation constants. Defaults are the dense-urban parameter set.
struct ChannelParams {
  double alpha_los = 3.0;     // LoS path-loss exponent
  double alpha_nlos = 4.0;    // NLoS path-loss exponent
  double b_env = 0.136;       // multiplies the elevation bracket
  double c_env = 11.95;       // prefactor and offset (degrees)
  double rice_k = 10.0;       // Rice factor of the LoS link
  double mu_gain = 0.5;       // mean channel power gain
  double noise_power = 4e-15; // W
  double bandwidth = 10e6;    // Hz

  /// Throws std::invalid_argument if any field is non-positive or
  /// alpha_nlos <= alpha_los.
  void validate() const;
};

struct LinkGeometry {
  double horiz_dist = 0.0;  // m
  double slant_dist = 0.0;  // m
  double elevation = 0.0;   // rad
};

enum class FadingMode { sampled, expected };

struct FadingDraw {
  double g_los = 0.0;   // Rician power gain
  double k_nlos = 0.0;  // Rayleigh power gain
  FadingMode mode = FadingMode::expected;
};

struct LinkStats {
  LinkGeometry geometry;
  double p_los = 0.0;
  double p_eff = 0.0;         // W
  double interference = 0.0;  // W
  double rate = 0.0;          // bit/s
  bool served = false;
};

LinkGeometry link_geometry(Point2 ue, Point3 uav);

/// 1 / (1 + c exp(-b (deg(theta) - c))).
double los_probability(double elevation, const ChannelParams& params);

/// Sampled mode draws g = |h|^2 with h = sqrt(mu K/(K+1)) + sqrt(mu/(K+1)) z,
/// z standard complex normal, and k ~ Exp(mean mu). Expected mode returns
/// g = k = mu.
FadingDraw sample_fading(RandomStream& rng, const ChannelParams& params, FadingMode mode);

/// P_LoS p g r^-aL + (1 - P_LoS) p k r^-aN.
double effective_received_power(double p_tx, const LinkGeometry& geom, const FadingDraw& fading,
                                const ChannelParams& params);

/// NLoS-only interference at `ue` from every UAV except `own_cluster`.
/// `avg_powers` and `fading_draws` are indexed by UAV; the entries at
/// `own_cluster` are ignored.
double inter_cluster_interference(Point2 ue, std::size_t own_cluster,
                                  std::span<const Point3> uav_positions,
                                  std::span<const double> avg_powers,
                                  std::span<const FadingDraw> fading_draws,
                                  const ChannelParams& params);

/// (B / share_count) log2(1 + p_eff / (interference + N_o)).
double data_rate(double p_eff, double interference, std::size_t share_count,
                 const ChannelParams& params);

}  // namespace uavcov
