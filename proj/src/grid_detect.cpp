#include "ecal/grid_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace ecal {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

double population_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

// Joint variance norm of one subset; linkages are subset-local.
double subset_score(std::span<const Candidate> candidates, const std::vector<std::size_t>& keep) {
  std::vector<double> dists(keep.size());
  std::vector<double> radii(keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < keep.size(); ++b) {
      if (a == b) continue;
      const double d2 = (candidates[keep[a]].center - candidates[keep[b]].center).squaredNorm();
      best = std::min(best, d2);
    }
    dists[a] = best;
    radii[a] = candidates[keep[a]].radius;
  }
  return std::abs(population_stddev(dists) + population_stddev(radii));
}

// Enumerates size-m subsets of `pool` in lexicographic order, tracking the
// minimum-score subset; ties go to the lexicographically smaller subset.
Selection enumerate_subsets(std::span<const Candidate> candidates, const std::vector<std::size_t>& pool, int m) {
  Selection best;
  best.score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(m);
  std::vector<std::size_t> keep(m);
  const int j = static_cast<int>(pool.size());
  for (int i = 0; i < m; ++i) pick[i] = i;
  for (;;) {
    for (int i = 0; i < m; ++i) keep[i] = pool[pick[i]];
    const double score = subset_score(candidates, keep);
    if (score < best.score) {
      best.score = score;
      best.indices = keep;
      best.status = SelectStatus::Ok;
    }
    int i = m - 1;
    while (i >= 0 && pick[i] == static_cast<std::size_t>(j - m + i)) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < m; ++k) pick[k] = pick[k - 1] + 1;
  }
  return best;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    if (result > cap) return cap + 1;
    result = result * (n - k + i) / i;
  }
  return result;
}

}  // namespace

double PatternSpec::pitch_mm() const { return diagonal_spacing_mm / std::numbers::sqrt2; }

std::vector<double> nearest_linkages(std::span<const Candidate> candidates) {
  const std::size_t j = candidates.size();
  std::vector<double> out(j, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < j; ++a) {
    for (std::size_t b = 0; b < j; ++b) {
      if (a == b) continue;
      out[a] = std::min(out[a], (candidates[a].center - candidates[b].center).squaredNorm());
    }
  }
  return out;
}

Selection select_grid(std::span<const Candidate> candidates, int m, const SelectConfig& cfg) {
  Selection failed;
  if (m < 1 || candidates.size() < static_cast<std::size_t>(m)) return failed;

  // When the full enumeration is cheap, run it: pruning exists to keep the
  // subset search tractable, not to pre-judge candidates, and skipping it
  // here keeps the result identical to the exhaustive search.
  if (binomial(candidates.size(), m, cfg.exhaustive_threshold) <= cfg.exhaustive_threshold) {
    std::vector<std::size_t> all(candidates.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return enumerate_subsets(candidates, all, m);
  }

  // Radius gate: clutter clusters rarely reproduce the pattern circle radius.
  // The relative floor keeps a near-zero MAD (clean data) from eating the
  // grid itself.
  std::vector<double> radii;
  radii.reserve(candidates.size());
  for (const auto& c : candidates) radii.push_back(c.radius);
  const double med = median(radii);
  std::vector<double> devs;
  devs.reserve(radii.size());
  for (double r : radii) devs.push_back(std::abs(r - med));
  const double mad = median(devs);
  const double gate = cfg.radius_gate_mads * std::max(mad, 0.0333 * med);

  // Perspective alone can spread the pattern radii past the gate, so the
  // prune never drops the pool below m: the m smallest deviations survive
  // unconditionally.
  std::vector<std::size_t> by_dev(candidates.size());
  for (std::size_t i = 0; i < by_dev.size(); ++i) by_dev[i] = i;
  std::sort(by_dev.begin(), by_dev.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::abs(candidates[a].radius - med);
    const double db = std::abs(candidates[b].radius - med);
    return da != db ? da < db : a < b;
  });
  std::vector<std::size_t> pool;
  for (std::size_t rank = 0; rank < by_dev.size(); ++rank) {
    const std::size_t i = by_dev[rank];
    if (rank < static_cast<std::size_t>(m) || std::abs(candidates[i].radius - med) <= gate) pool.push_back(i);
  }
  std::sort(pool.begin(), pool.end());
  if (pool.size() < static_cast<std::size_t>(m)) return failed;

  if (pool.size() - m > static_cast<std::size_t>(cfg.delta_max)) {
    failed.status = SelectStatus::TooMuchClutter;
    return failed;
  }
  if (binomial(pool.size(), m, cfg.max_combinations) > cfg.max_combinations) {
    failed.status = SelectStatus::CombinatorialGuard;
    return failed;
  }
  return enumerate_subsets(candidates, pool, m);
}

Selection select_grid_exhaustive(std::span<const Candidate> candidates, int m) {
  Selection failed;
  if (m < 1 || candidates.size() < static_cast<std::size_t>(m)) return failed;
  std::vector<std::size_t> pool(candidates.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  return enumerate_subsets(candidates, pool, m);
}

OrderResult order_grid_points(std::span<const Eigen::Vector2d> points, const PatternSpec& spec) {
  OrderResult result;
  const int m = spec.point_count();
  const int rows = spec.rows;
  const int cols = spec.cols;
  if (static_cast<int>(points.size()) != m || m < 4) return result;

  // Median nearest-neighbor distance sets the diagonal step scale.
  std::vector<double> nn(points.size(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = 0; b < points.size(); ++b) {
      if (a != b) nn[a] = std::min(nn[a], (points[a] - points[b]).norm());
    }
  }
  const double d_med = median(nn);

  // Diagonal-direction voting: short displacements cluster into the two
  // lattice directions.
  struct DirGroup {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    int count = 0;
  };
  std::vector<DirGroup> groups;
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      Eigen::Vector2d v = points[b] - points[a];
      // Diagonal steps sit at ~d_med; the axis-aligned links of the grid are
      // sqrt(2) further out, so the cutoff must stay below that.
      if (v.norm() > 1.25 * d_med) continue;
      if (v.x() < 0 || (v.x() == 0 && v.y() < 0)) v = -v;
      bool placed = false;
      for (auto& g : groups) {
        const Eigen::Vector2d mean = g.sum / g.count;
        const double cosang = mean.normalized().dot(v.normalized());
        if (cosang > std::cos(25.0 * std::numbers::pi / 180.0)) {
          g.sum += v;
          ++g.count;
          placed = true;
          break;
        }
      }
      if (!placed) groups.push_back({v, 1});
    }
  }
  std::sort(groups.begin(), groups.end(), [](const DirGroup& a, const DirGroup& b) { return a.count > b.count; });
  if (groups.size() < 2) {
    result.status = OrderStatus::DirectionsNotFound;
    return result;
  }
  const Eigen::Vector2d dir1 = groups[0].sum / groups[0].count;
  const Eigen::Vector2d dir2 = groups[1].sum / groups[1].count;
  const double cross = dir1.x() * dir2.y() - dir1.y() * dir2.x();
  if (std::abs(cross) < 0.3 * dir1.norm() * dir2.norm()) {
    result.status = OrderStatus::DirectionsNotFound;
    return result;
  }

  // Lattice walk with per-point step refresh; tolerates perspective and
  // radial distortion bending the lattice.
  struct Node {
    bool assigned = false;
    int i = 0, j = 0;
    Eigen::Vector2d step1, step2;
  };
  std::vector<Node> nodes(points.size());
  std::vector<std::size_t> queue;
  nodes[0] = {true, 0, 0, dir1, dir2};
  queue.push_back(0);
  std::size_t assigned = 1;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const std::size_t p = queue[qi];
    const Node node = nodes[p];
    const struct {
      Eigen::Vector2d step;
      int di, dj;
      bool first;
    } moves[4] = {{node.step1, 1, 0, true}, {-node.step1, -1, 0, true}, {node.step2, 0, 1, false}, {-node.step2, 0, -1, false}};
    for (const auto& mv : moves) {
      const Eigen::Vector2d target = points[p] + mv.step;
      std::size_t best = points.size();
      double best_d = 0.35 * mv.step.norm();
      for (std::size_t q = 0; q < points.size(); ++q) {
        if (q == p) continue;
        const double d = (points[q] - target).norm();
        if (d < best_d) {
          best_d = d;
          best = q;
        }
      }
      if (best == points.size() || nodes[best].assigned) continue;
      Node& nb = nodes[best];
      nb.assigned = true;
      nb.i = node.i + mv.di;
      nb.j = node.j + mv.dj;
      const Eigen::Vector2d actual = points[best] - points[p];
      nb.step1 = mv.first ? Eigen::Vector2d(actual * mv.di) : node.step1;
      nb.step2 = mv.first ? node.step2 : Eigen::Vector2d(actual * mv.dj);
      queue.push_back(best);
      ++assigned;
    }
  }
  if (assigned != points.size()) {
    result.status = OrderStatus::LatticeIncomplete;
    return result;
  }

  // Try the eight sign/swap variants of the diagonal coordinates. The
  // half-row offset kills 180-degree symmetry, but the pattern is mirror
  // symmetric about its column axis, so two variants map onto valid cells:
  // one direct-handed, one mirror-handed. A front-facing view preserves
  // lattice handedness, so the direct one wins.
  const double img_orientation = cross;  // sign of d1 x d2 in image coords
  int valid_count = 0;
  int direct_count = 0;
  for (int swap = 0; swap < 2; ++swap) {
    for (int s1 = -1; s1 <= 1; s1 += 2) {
      for (int s2 = -1; s2 <= 1; s2 += 2) {
        std::vector<int> cs(points.size()), ks(points.size());
        int cmin = std::numeric_limits<int>::max();
        int kmin = std::numeric_limits<int>::max();
        for (std::size_t p = 0; p < points.size(); ++p) {
          const int a = s1 * (swap ? nodes[p].j : nodes[p].i);
          const int b = s2 * (swap ? nodes[p].i : nodes[p].j);
          cs[p] = a + b;
          ks[p] = a - b;
          cmin = std::min(cmin, cs[p]);
          kmin = std::min(kmin, ks[p]);
        }
        std::vector<std::size_t> order(static_cast<std::size_t>(m), points.size());
        bool ok = true;
        for (std::size_t p = 0; p < points.size() && ok; ++p) {
          const int c = cs[p] - cmin;
          const int k = ks[p] - kmin;
          if (c < 0 || c >= cols || k < 0 || k >= 2 * rows || (c + k) % 2 != 0) {
            ok = false;
            break;
          }
          const int r = (k - (c % 2)) / 2;
          if (r < 0 || r >= rows) {
            ok = false;
            break;
          }
          const std::size_t cell = static_cast<std::size_t>(r) * cols + c;
          if (order[cell] != points.size()) {
            ok = false;
            break;
          }
          order[cell] = p;
        }
        if (!ok) continue;
        ++valid_count;
        // Canonical diagonal basis has negative cross product in image
        // coordinates (with image y pointing down).
        const double det = (swap ? -1.0 : 1.0) * s1 * s2;
        const bool mirror = img_orientation * det > 0.0;
        if (!mirror) ++direct_count;
        if (!mirror || result.order.empty()) {
          result.order = order;
          result.flipped = mirror;
        }
      }
    }
  }
  if (valid_count == 0 || direct_count > 1) {
    result.status = valid_count == 0 ? OrderStatus::LatticeIncomplete : OrderStatus::Ambiguous;
    result.order.clear();
    return result;
  }
  result.status = OrderStatus::Ok;
  return result;
}

}  // namespace ecal
