#pragma once

// Field construction, UE generation, UAV placement, network evaluation and
// feasibility checks for the coverage problem.

#include <cstddef>
#include <vector>

#include "uavcov/channel.hpp"
#include "uavcov/clustering.hpp"
#include "uavcov/random.hpp"

namespace uavcov {

struct FieldConfig {
  double side_len = 10000.0;   // L, m
  std::size_t grid_dim = 100;  // cells per side
  double uav_height = 500.0;   // h, m
  std::size_t num_ues = 30;    // N
  double power_budget = 1.0;   // P_t, W per UAV
  double rate_threshold = 30e6;  // R_th, bit/s

  double cell_side() const { return side_len / static_cast<double>(grid_dim); }
  void validate() const;
};

/// Per-cluster transmit powers. `powers[j][s]` belongs to UE
/// `assignment.members[j][s]`.
struct PowerAllocation {
  std::vector<std::vector<double>> powers;

  double cluster_total(std::size_t j) const;
  double total() const;
};

/// How an interfering UAV's transmit power is summarised.
enum class InterferencePower {
  current_mean,   // mean of the UAV's current allocation vector
  static_budget,  // P_t / N_s regardless of allocation
};

struct NetworkSnapshot {
  std::vector<Point2> ue_positions;
  std::vector<Point3> uav_positions;
  ClusterAssignment assignment;
  PowerAllocation allocation;
};

struct EvaluationResult {
  std::vector<LinkStats> per_ue;  // indexed by UE
  std::vector<std::size_t> served_per_cluster;
  std::size_t total_served = 0;
  double total_rate = 0.0;   // bit/s, all UEs
  double wasted_rate = 0.0;  // bit/s, excess over R_th among served UEs
};

struct ConstraintReport {
  bool c1_rate = true;        // served flags agree with rate >= R_th
  bool c2_single_uav = true;  // every UE associated with exactly one UAV
  bool c3_binary = true;      // labels/sizes/members describe a 0-1 association
  bool c4_budget = true;
  bool c5_in_field = true;
  std::vector<bool> c4_per_cluster;

  bool all() const { return c1_rate && c2_single_uav && c3_binary && c4_budget && c5_in_field; }
};

/// Grid-cell centres drawn without replacement.
std::vector<Point2> generate_ues(RandomStream& rng, const FieldConfig& field);

/// UAV j hovers at (c_j.x, c_j.y, h).
std::vector<Point3> place_uavs(const ClusterAssignment& assignment, const FieldConfig& field);

/// Evaluates every UE's link under the snapshot's allocation. Fading is drawn
/// afresh from `rng` in sampled mode.
EvaluationResult evaluate_network(const NetworkSnapshot& snapshot, const ChannelParams& params,
                                  const FieldConfig& field, RandomStream& rng, FadingMode mode,
                                  InterferencePower interference = InterferencePower::current_mean);

/// Never throws; malformed snapshots show up as failed constraints.
ConstraintReport check_constraints(const NetworkSnapshot& snapshot, const EvaluationResult& result,
                                   const FieldConfig& field);

}  // namespace uavcov
