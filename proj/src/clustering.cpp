#include "ecal/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ecal {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

inline bool neighbors(const NormalizedEvent& a, const NormalizedEvent& b, double eps_s2, double eps_t) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy <= eps_s2 && std::abs(a.t - b.t) <= eps_t;
}

// Shared finishing step: given per-point core flags and a neighbor iterator,
// build density-connected components and deterministic border assignment.
template <class NeighborFn>
ClusterSet finalize(std::span<const NormalizedEvent> points, const std::vector<bool>& core, NeighborFn&& for_each_neighbor) {
  const std::size_t n = points.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for_each_neighbor(i, [&](std::size_t j) {
      if (core[j]) uf.unite(i, j);
    });
  }

  ClusterSet out;
  out.labels.assign(n, kNoiseLabel);
  std::vector<int> root_label(n, kNoiseLabel);
  // Label core components in order of their smallest member index.
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const std::size_t r = uf.find(i);
    if (root_label[r] == kNoiseLabel) {
      root_label[r] = static_cast<int>(out.clusters.size());
      out.clusters.emplace_back();
    }
    out.labels[i] = root_label[r];
    out.clusters[root_label[r]].push_back(i);
  }
  // Border points: lowest-index core neighbor decides the cluster.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::size_t best = n;
    for_each_neighbor(i, [&](std::size_t j) {
      if (core[j] && j < best) best = j;
    });
    if (best < n) {
      out.labels[i] = out.labels[best];
      out.clusters[out.labels[i]].push_back(i);
    }
  }
  for (auto& c : out.clusters) std::sort(c.begin(), c.end());
  return out;
}

}  // namespace

ClusterSet st_dbscan(std::span<const NormalizedEvent> points, const ClusterParamsCfg& cfg) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  const double eps_s2 = cfg.eps_s * cfg.eps_s;

  // Uniform grid with cell edge >= eps so +-1 cell covers the neighborhood.
  const auto axis_cells = [](double eps) {
    return std::clamp<int>(static_cast<int>(std::floor(1.0 / eps)), 1, 512);
  };
  const int ns = axis_cells(cfg.eps_s);
  const int nt = axis_cells(cfg.eps_t);
  const auto cell_of = [&](const NormalizedEvent& p) {
    const int cx = std::clamp(static_cast<int>(p.x * ns), 0, ns - 1);
    const int cy = std::clamp(static_cast<int>(p.y * ns), 0, ns - 1);
    const int ct = std::clamp(static_cast<int>(p.t * nt), 0, nt - 1);
    return (static_cast<std::size_t>(ct) * ns + cy) * ns + cx;
  };

  const std::size_t ncells = static_cast<std::size_t>(ns) * ns * nt;
  std::vector<std::uint32_t> counts(ncells + 1, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[cell_of(points[i]) + 1];
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  std::vector<std::uint32_t> bucket(n);
  {
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < n; ++i) bucket[fill[cell_of(points[i])]++] = static_cast<std::uint32_t>(i);
  }

  const auto for_each_neighbor = [&](std::size_t i, auto&& fn) {
    const NormalizedEvent& p = points[i];
    const int cx = std::clamp(static_cast<int>(p.x * ns), 0, ns - 1);
    const int cy = std::clamp(static_cast<int>(p.y * ns), 0, ns - 1);
    const int ct = std::clamp(static_cast<int>(p.t * nt), 0, nt - 1);
    for (int dt = -1; dt <= 1; ++dt) {
      const int t = ct + dt;
      if (t < 0 || t >= nt) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        const int y = cy + dy;
        if (y < 0 || y >= ns) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx;
          if (x < 0 || x >= ns) continue;
          const std::size_t c = (static_cast<std::size_t>(t) * ns + y) * ns + x;
          for (std::uint32_t k = counts[c]; k < counts[c + 1]; ++k) {
            const std::size_t j = bucket[k];
            if (j != i && neighbors(p, points[j], eps_s2, cfg.eps_t)) fn(j);
          }
        }
      }
    }
  };

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 1;  // the point itself
    for_each_neighbor(i, [&](std::size_t) { ++count; });
    core[i] = count >= cfg.min_pts;
  }
  return finalize(points, core, for_each_neighbor);
}

ClusterSet brute_force_dbscan(std::span<const NormalizedEvent> points, const ClusterParamsCfg& cfg) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  const double eps_s2 = cfg.eps_s * cfg.eps_s;
  const auto for_each_neighbor = [&](std::size_t i, auto&& fn) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && neighbors(points[i], points[j], eps_s2, cfg.eps_t)) fn(j);
    }
  };
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 1;
    for_each_neighbor(i, [&](std::size_t) { ++count; });
    core[i] = count >= cfg.min_pts;
  }
  return finalize(points, core, for_each_neighbor);
}

}  // namespace ecal
