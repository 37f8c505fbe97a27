#include "uavcov/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uavcov {

namespace {

bool in_field(double x, double y, double side) {
  return x >= 0.0 && x <= side && y >= 0.0 && y <= side;
}

}  // namespace

void FieldConfig::validate() const {
  if (!(side_len > 0.0) || !std::isfinite(side_len)) throw std::invalid_argument("side_len must be positive");
  if (grid_dim == 0) throw std::invalid_argument("grid_dim must be positive");
  if (!(uav_height > 0.0) || !std::isfinite(uav_height)) throw std::invalid_argument("uav_height must be positive");
  if (num_ues == 0) throw std::invalid_argument("num_ues must be at least 1");
  if (!(power_budget > 0.0) || !std::isfinite(power_budget)) throw std::invalid_argument("power_budget must be positive");
  if (!(rate_threshold > 0.0) || !std::isfinite(rate_threshold)) throw std::invalid_argument("rate_threshold must be positive");
}

double PowerAllocation::cluster_total(std::size_t j) const {
  return std::accumulate(powers.at(j).begin(), powers[j].end(), 0.0);
}

double PowerAllocation::total() const {
  double t = 0.0;
  for (std::size_t j = 0; j < powers.size(); ++j) t += cluster_total(j);
  return t;
}

std::vector<Point2> generate_ues(RandomStream& rng, const FieldConfig& field) {
  field.validate();
  const std::size_t cells = field.grid_dim * field.grid_dim;
  if (field.num_ues > cells) {
    throw std::invalid_argument("more UEs than grid cells");
  }
  // Partial Fisher-Yates over cell indices.
  std::vector<std::size_t> idx(cells);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < field.num_ues; ++i) {
    const std::size_t j = i + rng.index(cells - i);
    std::swap(idx[i], idx[j]);
  }
  const double l = field.cell_side();
  std::vector<Point2> out;
  out.reserve(field.num_ues);
  for (std::size_t i = 0; i < field.num_ues; ++i) {
    const std::size_t row = idx[i] / field.grid_dim;
    const std::size_t col = idx[i] % field.grid_dim;
    out.push_back({(static_cast<double>(col) + 0.5) * l, (static_cast<double>(row) + 0.5) * l});
  }
  return out;
}

std::vector<Point3> place_uavs(const ClusterAssignment& assignment, const FieldConfig& field) {
  if (assignment.centroids.empty()) {
    throw std::invalid_argument("at least one centroid required");
  }
  std::vector<Point3> out;
  out.reserve(assignment.centroids.size());
  for (const Point2& c : assignment.centroids) {
    if (!in_field(c.x, c.y, field.side_len)) {
      throw std::invalid_argument("centroid outside the field");
    }
    out.push_back({c.x, c.y, field.uav_height});
  }
  return out;
}

EvaluationResult evaluate_network(const NetworkSnapshot& snapshot, const ChannelParams& params,
                                  const FieldConfig& field, RandomStream& rng, FadingMode mode,
                                  InterferencePower interference) {
  const auto& asg = snapshot.assignment;
  const std::size_t k = asg.num_clusters();
  const std::size_t n = snapshot.ue_positions.size();
  if (snapshot.uav_positions.size() != k || snapshot.allocation.powers.size() != k ||
      asg.members.size() != k || asg.sizes.size() != k) {
    throw std::invalid_argument("snapshot cluster count mismatch");
  }
  std::vector<double> avg_power(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (snapshot.allocation.powers[j].size() != asg.members[j].size() || asg.sizes[j] == 0) {
      throw std::invalid_argument("allocation does not match cluster sizes");
    }
    const double nj = static_cast<double>(asg.sizes[j]);
    avg_power[j] = interference == InterferencePower::current_mean
                       ? snapshot.allocation.cluster_total(j) / nj
                       : field.power_budget / nj;
  }

  std::vector<std::size_t> cluster_of(n, k), slot_of(n, 0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t s = 0; s < asg.members[j].size(); ++s) {
      const std::size_t i = asg.members[j][s];
      if (i >= n) throw std::invalid_argument("member index out of range");
      cluster_of[i] = j;
      slot_of[i] = s;
    }
  }

  EvaluationResult r;
  r.per_ue.resize(n);
  r.served_per_cluster.assign(k, 0);
  std::vector<FadingDraw> draws(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = cluster_of[i];
    if (j == k) throw std::invalid_argument("UE not associated with any cluster");
    const Point2 ue = snapshot.ue_positions[i];
    LinkStats& st = r.per_ue[i];
    st.geometry = link_geometry(ue, snapshot.uav_positions[j]);
    st.p_los = los_probability(st.geometry.elevation, params);
    const FadingDraw own = sample_fading(rng, params, mode);
    st.p_eff = effective_received_power(snapshot.allocation.powers[j][slot_of[i]], st.geometry, own, params);
    for (std::size_t s = 0; s < k; ++s) {
      draws[s] = s == j ? own : sample_fading(rng, params, mode);
    }
    st.interference = inter_cluster_interference(ue, j, snapshot.uav_positions, avg_power, draws, params);
    st.rate = data_rate(st.p_eff, st.interference, asg.sizes[j], params);
    st.served = st.rate >= field.rate_threshold;
    r.total_rate += st.rate;
    if (st.served) {
      ++r.served_per_cluster[j];
      ++r.total_served;
      r.wasted_rate += st.rate - field.rate_threshold;
    }
  }
  return r;
}

ConstraintReport check_constraints(const NetworkSnapshot& snapshot, const EvaluationResult& result,
                                   const FieldConfig& field) {
  ConstraintReport rep;
  const auto& asg = snapshot.assignment;
  const std::size_t n = snapshot.ue_positions.size();
  const std::size_t k = asg.centroids.size();

  if (result.per_ue.size() != n) {
    rep.c1_rate = false;
  } else {
    for (const auto& st : result.per_ue) {
      if (st.served != (st.rate >= field.rate_threshold)) rep.c1_rate = false;
    }
  }

  std::vector<std::size_t> seen(n, 0);
  if (asg.members.size() != k) {
    rep.c2_single_uav = false;
    rep.c3_binary = false;
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i : asg.members[j]) {
        if (i >= n) {
          rep.c3_binary = false;
          continue;
        }
        ++seen[i];
        if (asg.labels.size() == n && asg.labels[i] != j) rep.c2_single_uav = false;
      }
    }
  }
  for (std::size_t c : seen) {
    if (c != 1) rep.c2_single_uav = false;
  }
  if (asg.labels.size() != n || asg.sizes.size() != k) {
    rep.c3_binary = false;
  } else {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t l : asg.labels) {
      if (l >= k) {
        rep.c3_binary = false;
      } else {
        ++counts[l];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != asg.sizes[j]) rep.c3_binary = false;
      if (j < asg.members.size() && asg.members[j].size() != asg.sizes[j]) rep.c3_binary = false;
    }
  }

  const auto& powers = snapshot.allocation.powers;
  rep.c4_per_cluster.assign(powers.size(), true);
  if (powers.size() != k) rep.c4_budget = false;
  for (std::size_t j = 0; j < powers.size(); ++j) {
    double total = 0.0;
    bool ok = true;
    for (double p : powers[j]) {
      if (!(p >= 0.0)) ok = false;
      total += p;
    }
    if (!(total <= field.power_budget + 1e-9)) ok = false;
    rep.c4_per_cluster[j] = ok;
    if (!ok) rep.c4_budget = false;
  }

  for (const Point3& u : snapshot.uav_positions) {
    if (!in_field(u.x, u.y, field.side_len)) rep.c5_in_field = false;
  }
  for (const Point2& p : snapshot.ue_positions) {
    if (!in_field(p.x, p.y, field.side_len)) rep.c5_in_field = false;
  }
  return rep;
}

}  // namespace uavcov
