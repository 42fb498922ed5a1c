#pragma once

#include <span>
#include <vector>

#include "ecal/event_model.hpp"

namespace ecal {

inline constexpr int kNoiseLabel = -1;

struct ClusterParamsCfg {
  double eps_s = 0.015;  // planar radius, normalized units
  double eps_t = 0.015;  // temporal half-height, normalized units
  int min_pts = 10;      // neighborhood count including the point itself
};

struct ClusterSet {
  std::vector<int> labels;                         // per event: cluster id >= 0 or kNoiseLabel
  std::vector<std::vector<std::size_t>> clusters;  // sorted index sets per cluster
  std::size_t cluster_count() const { return clusters.size(); }
};

/// DBSCAN over (x,y,t) with a cylindrical neighborhood: planar distance
/// <= eps_s and |dt| <= eps_t (both boundaries inclusive). Core points are
/// density-connected; a border point joins the cluster of its lowest-index
/// core neighbor, which makes the partition independent of input order.
/// Neighbor queries use a uniform grid over [0,1]^3.
ClusterSet st_dbscan(std::span<const NormalizedEvent> points, const ClusterParamsCfg& cfg);

/// Same contract computed with O(n^2) pairwise scans. Test oracle.
ClusterSet brute_force_dbscan(std::span<const NormalizedEvent> points, const ClusterParamsCfg& cfg);

}  // namespace ecal
