#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace ecal {

/// Asymmetric circle grid: `cols` columns of `rows` circles each, odd
/// columns shifted half a row, uniform diagonal spacing between neighbors.
struct PatternSpec {
  int rows = 4;
  int cols = 11;
  double diagonal_spacing_mm = 24.0;
  int point_count() const { return rows * cols; }
  double pitch_mm() const;  // diagonal_spacing / sqrt(2)
};

/// One fitted cylinder reported in pixel units.
struct Candidate {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  int cluster_id = -1;
};

struct GridDetection {
  std::vector<Eigen::Vector2d> points;  // canonical pattern order (row-major)
  std::int64_t t_ref_us = 0;
  double score = 0.0;  // joint variance norm of the winning subset
  bool flipped = false;
};

/// Squared Euclidean distance from each candidate to its nearest other
/// candidate. Requires at least two candidates.
std::vector<double> nearest_linkages(std::span<const Candidate> candidates);

struct SelectConfig {
  int delta_max = 8;                        // reject when J - M exceeds this after pruning
  std::uint64_t max_combinations = 250000;  // hard cap on enumerated subsets
  double radius_gate_mads = 3.0;            // radius prune threshold in MADs
  std::uint64_t exhaustive_threshold = 3000;  // below this subset count, skip pruning entirely
};

enum class SelectStatus { Ok, TooFewCandidates, TooMuchClutter, CombinatorialGuard };

struct Selection {
  SelectStatus status = SelectStatus::TooFewCandidates;
  std::vector<std::size_t> indices;  // into the input candidate list, sorted
  double score = 0.0;
};

/// Size-M subset minimizing |sigma(D_subset) + sigma(r_subset)| where D is
/// recomputed within the subset. Candidates whose radius sits further than
/// radius_gate_mads MADs from the median radius are pruned before the
/// subset search.
Selection select_grid(std::span<const Candidate> candidates, int m, const SelectConfig& cfg = {});

/// Full C(J, M) enumeration with no pruning. Test oracle.
Selection select_grid_exhaustive(std::span<const Candidate> candidates, int m);

enum class OrderStatus { Ok, BadInput, DirectionsNotFound, LatticeIncomplete, Ambiguous };

struct OrderResult {
  OrderStatus status = OrderStatus::BadInput;
  std::vector<std::size_t> order;  // order[r*cols + c] = input point index
  bool flipped = false;
};

/// Recovers canonical row/column correspondence for M image points of the
/// asymmetric grid: estimates the two diagonal lattice directions, walks the
/// lattice with locally adapted steps, then resolves orientation using the
/// asymmetric offset (the pattern has no 180-degree symmetry).
OrderResult order_grid_points(std::span<const Eigen::Vector2d> points, const PatternSpec& spec);

}  // namespace ecal
