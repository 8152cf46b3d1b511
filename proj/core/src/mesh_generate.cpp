#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "delaunay.hpp"
#include "ischem/mesh.hpp"

namespace ischem {

namespace {

constexpr double kGrading = 0.35;        // mesh-size growth per unit distance
constexpr double kBoundaryClear = 0.70;  // interior points keep this * h off the boundary
constexpr double kMinAngleDeg = 2.0;

struct SizeField {
  double h_base;
  const std::vector<RefinementDisk>* disks;

  double operator()(const Vec2& p) const {
    double h = h_base;
    if (disks) {
      for (const auto& d : *disks) {
        if (d.h <= 0 || d.h >= h_base) continue;
        const double outside = std::max(0.0, (p - d.center).norm() - d.radius);
        h = std::min(h, d.h + kGrading * outside);
      }
    }
    return h;
  }
  double h_min() const {
    double h = h_base;
    if (disks) {
      for (const auto& d : *disks) {
        if (d.h > 0) h = std::min(h, d.h);
      }
    }
    return h;
  }
};

struct Loop {
  std::vector<Vec2> points;  // ordered, domain on the left
  BoundaryRegion region;
};

// Sample the circular arc (center, radius) from angle th0 to th1 (walking in
// +dir, |dir|=1) with local spacing h(x). Endpoints are excluded.
std::vector<Vec2> sample_arc(const Vec2& center, double radius, double th0, double th1,
                             double dir, const SizeField& h) {
  const double span = std::abs(th1 - th0);
  std::vector<double> steps;
  double t = 0.0;
  while (t < span) {
    const double th = th0 + dir * t;
    const Vec2 p = center + radius * Vec2(std::cos(th), std::sin(th));
    const double d = h(p) / radius;
    steps.push_back(d);
    t += d;
  }
  if (steps.size() < 2) steps.assign(2, span / 2.0);
  const double total = std::accumulate(steps.begin(), steps.end(), 0.0);
  const double scale = span / total;
  std::vector<Vec2> out;
  double acc = 0.0;
  for (size_t i = 0; i + 1 < steps.size(); ++i) {
    acc += steps[i] * scale;
    const double th = th0 + dir * acc;
    out.push_back(center + radius * Vec2(std::cos(th), std::sin(th)));
  }
  return out;
}

// Full circle sampled with local spacing; dir=+1 gives CCW, -1 CW.
std::vector<Vec2> sample_circle(const Vec2& center, double radius, double dir, const SizeField& h) {
  std::vector<Vec2> pts = sample_arc(center, radius, 0.0, 2.0 * M_PI, dir, h);
  pts.insert(pts.begin(), center + Vec2(radius, 0.0));
  return pts;
}

std::vector<Loop> boundary_loops(const VentricleGeometry& g, const SizeField& h) {
  const Vec2 ab = g.outer_center_b - g.outer_center_a;
  const double d = ab.norm();
  const double beta = std::atan2(ab.y(), ab.x());
  const double along_a = (d * d + g.outer_radius_a * g.outer_radius_a -
                          g.outer_radius_b * g.outer_radius_b) / (2.0 * d);
  const double alpha = std::acos(std::clamp(along_a / g.outer_radius_a, -1.0, 1.0));

  const Vec2 c1 = g.outer_center_a + g.outer_radius_a * Vec2(std::cos(beta + alpha), std::sin(beta + alpha));
  const Vec2 c2 = g.outer_center_a + g.outer_radius_a * Vec2(std::cos(beta - alpha), std::sin(beta - alpha));

  auto angle_of = [](const Vec2& center, const Vec2& p) { return std::atan2(p.y() - center.y(), p.x() - center.x()); };

  Loop epi;
  epi.region = BoundaryRegion::EPI;
  epi.points.push_back(c1);
  {
    // Arc of circle A outside disk B, CCW from c1 to c2.
    auto pts = sample_arc(g.outer_center_a, g.outer_radius_a, beta + alpha, beta - alpha + 2.0 * M_PI, 1.0, h);
    epi.points.insert(epi.points.end(), pts.begin(), pts.end());
  }
  epi.points.push_back(c2);
  {
    // Arc of circle B outside disk A, CCW from c2 back to c1.
    double th0 = angle_of(g.outer_center_b, c2);
    double th1 = angle_of(g.outer_center_b, c1);
    while (th1 <= th0) th1 += 2.0 * M_PI;
    auto pts = sample_arc(g.outer_center_b, g.outer_radius_b, th0, th1, 1.0, h);
    epi.points.insert(epi.points.end(), pts.begin(), pts.end());
  }

  Loop lv{sample_circle(g.lv_center, g.lv_radius, -1.0, h), BoundaryRegion::ENDO_LV};
  Loop rv{sample_circle(g.rv_center, g.rv_radius, -1.0, h), BoundaryRegion::ENDO_RV};
  return {std::move(epi), std::move(lv), std::move(rv)};
}

std::vector<Vec2> interior_points(const VentricleGeometry& g, const SizeField& h,
                                  const std::vector<Vec2>& boundary_pts,
                                  const std::vector<std::pair<Vec2, Vec2>>& boundary_segments) {
  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi = -lo;
  for (const auto& p : boundary_pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  // Hash grid over the already accepted points for proximity queries.
  const double cell = h.h_min();
  auto cell_key = [&](const Vec2& p) {
    return std::pair<long, long>(long(std::floor(p.x() / cell)), long(std::floor(p.y() / cell)));
  };
  std::map<std::pair<long, long>, std::vector<Vec2>> grid;
  auto near_any = [&](const Vec2& p, double r) {
    const long ci = long(std::floor(p.x() / cell));
    const long cj = long(std::floor(p.y() / cell));
    const long reach = long(std::ceil(r / cell));
    for (long j = cj - reach; j <= cj + reach; ++j) {
      for (long i = ci - reach; i <= ci + reach; ++i) {
        auto it = grid.find({i, j});
        if (it == grid.end()) continue;
        for (const auto& q : it->second) {
          if ((q - p).norm() < r) return true;
        }
      }
    }
    return false;
  };
  for (const auto& p : boundary_pts) grid[cell_key(p)].push_back(p);

  std::vector<Vec2> out;

  // Staggered offset layer behind each boundary edge, so the strip between
  // the boundary and the lattice is always covered.
  for (const auto& [a, b] : boundary_segments) {
    const Vec2 mid = 0.5 * (a + b);
    const Vec2 tangent = (b - a).normalized();
    const Vec2 inward(-tangent.y(), tangent.x());  // domain lies on the left
    const double hp = h(mid);
    const Vec2 q = mid + 0.8 * hp * inward;
    if (g.signed_distance(q) > -0.45 * hp) continue;
    if (near_any(q, 0.62 * hp)) continue;
    out.push_back(q);
    grid[cell_key(q)].push_back(q);
  }
  // Hex lattices at geometrically graded spacings; each point is accepted
  // only where the local target size matches its level's band.
  std::vector<double> levels{h.h_base};
  while (levels.back() > h.h_min() * 1.4) {
    levels.push_back(std::max(h.h_min(), levels.back() / 2.0));
  }
  for (size_t lev = levels.size(); lev-- > 0;) {  // finest first
    const double s = levels[lev];
    const double band_lo = 0.95 * s;
    const double band_hi = (lev == 0) ? std::numeric_limits<double>::max() : 0.95 * levels[lev - 1];
    const double row_dy = s * std::sqrt(3.0) / 2.0;
    const int nj = int((hi.y() - lo.y()) / row_dy) + 1;
    const int ni = int((hi.x() - lo.x()) / s) + 2;
    for (int j = 0; j <= nj; ++j) {
      const double y = lo.y() + j * row_dy;
      const double off = (j % 2) ? s / 2.0 : 0.0;
      for (int i = 0; i <= ni; ++i) {
        const Vec2 p(lo.x() + off + i * s, y);
        const double hp = h(p);
        if (hp < band_lo || hp >= band_hi) continue;
        if (g.signed_distance(p) > -kBoundaryClear * hp) continue;
        if (near_any(p, 0.62 * hp)) continue;
        out.push_back(p);
        grid[cell_key(p)].push_back(p);
      }
    }
  }
  return out;
}

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto ang = [](const Vec2& u, const Vec2& v) {
    return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
  };
  const double a0 = ang(b - a, c - a);
  const double a1 = ang(a - b, c - b);
  const double a2 = M_PI - a0 - a1;
  return std::min({a0, a1, a2}) * 180.0 / M_PI;
}

}  // namespace

Mesh generate_ventricle_section(const VentricleGeometry& geometry, double h,
                                const std::vector<RefinementDisk>& refinement) {
  if (!(h > 0)) throw GeometryError("target edge length h must be positive");
  geometry.check();
  for (const auto& d : refinement) {
    if (d.radius < 0 || d.h < 0) throw GeometryError("invalid refinement disk");
  }
  const SizeField size{h, &refinement};

  auto loops = boundary_loops(geometry, size);
  std::vector<Vec2> points;
  std::vector<std::pair<int, int>> loop_ranges;
  std::vector<BoundaryRegion> loop_regions;
  for (const auto& loop : loops) {
    loop_ranges.emplace_back(int(points.size()), int(points.size() + loop.points.size()));
    loop_regions.push_back(loop.region);
    points.insert(points.end(), loop.points.begin(), loop.points.end());
  }
  const int n_boundary = int(points.size());

  std::vector<std::pair<Vec2, Vec2>> segments;
  for (size_t l = 0; l < loop_ranges.size(); ++l) {
    const auto [begin, end] = loop_ranges[l];
    for (int i = begin; i < end; ++i) {
      const int j = (i + 1 == end) ? begin : i + 1;
      segments.emplace_back(points[size_t(i)], points[size_t(j)]);
    }
  }

  auto interior = interior_points(geometry, size, points, segments);
  points.insert(points.end(), interior.begin(), interior.end());

  auto keep_filter = [&](const std::vector<std::array<int, 3>>& tris) {
    std::vector<std::array<int, 3>> kept;
    kept.reserve(tris.size());
    for (const auto& t : tris) {
      const Vec2 c = (points[size_t(t[0])] + points[size_t(t[1])] + points[size_t(t[2])]) / 3.0;
      if (geometry.signed_distance(c) < 0.0) kept.push_back(t);
    }
    return kept;
  };

  std::vector<std::array<int, 3>> tris = keep_filter(detail::delaunay_triangulate(points));

  // Laplacian smoothing of the interior nodes with periodic re-triangulation.
  for (int round = 0; round < 4; ++round) {
    std::vector<Vec2> accum(points.size(), Vec2::Zero());
    std::vector<int> deg(points.size(), 0);
    for (const auto& t : tris) {
      for (int k = 0; k < 3; ++k) {
        const int u = t[size_t(k)];
        const int v = t[size_t((k + 1) % 3)];
        accum[size_t(u)] += points[size_t(v)];
        accum[size_t(v)] += points[size_t(u)];
        deg[size_t(u)]++;
        deg[size_t(v)]++;
      }
    }
    for (int i = n_boundary; i < int(points.size()); ++i) {
      if (deg[size_t(i)] == 0) continue;
      const Vec2 target = accum[size_t(i)] / double(deg[size_t(i)]);
      const Vec2 cand = points[size_t(i)] + 0.7 * (target - points[size_t(i)]);
      if (geometry.signed_distance(cand) <= -0.5 * kBoundaryClear * size(cand)) {
        points[size_t(i)] = cand;
      }
    }
    tris = keep_filter(detail::delaunay_triangulate(points));
  }

  // Drop nodes that lost all their triangles and compact the numbering.
  std::vector<int> remap(points.size(), -1);
  for (const auto& t : tris) {
    for (int v : t) remap[size_t(v)] = 0;
  }
  for (int i = 0; i < n_boundary; ++i) {
    if (remap[size_t(i)] < 0) throw MeshingError("boundary node lost during meshing");
  }
  std::vector<Vec2> nodes;
  nodes.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    if (remap[i] == 0) {
      remap[i] = int(nodes.size());
      nodes.push_back(points[i]);
    }
  }
  for (auto& t : tris) {
    for (int& v : t) v = remap[size_t(v)];
  }

  std::vector<BoundaryEdge> boundary;
  for (size_t l = 0; l < loop_ranges.size(); ++l) {
    const auto [begin, end] = loop_ranges[l];
    for (int i = begin; i < end; ++i) {
      const int j = (i + 1 == end) ? begin : i + 1;
      boundary.push_back({remap[size_t(i)], remap[size_t(j)], loop_regions[l]});
    }
  }

  for (const auto& t : tris) {
    const double angle = min_angle_deg(nodes[size_t(t[0])], nodes[size_t(t[1])], nodes[size_t(t[2])]);
    if (angle < kMinAngleDeg) {
      throw MeshingError("meshing produced a near-degenerate triangle (min angle " +
                         std::to_string(angle) + " deg)");
    }
  }

  Mesh mesh(std::move(nodes), std::move(tris), std::move(boundary));
  if (mesh.max_edge_length() > 1.5 * h) {
    double worst = 0.0;
    Vec2 at = Vec2::Zero();
    for (const auto& t : mesh.triangles()) {
      for (int k = 0; k < 3; ++k) {
        const Vec2& a = mesh.node(t[size_t(k)]);
        const Vec2& b = mesh.node(t[size_t((k + 1) % 3)]);
        if ((a - b).norm() > worst) {
          worst = (a - b).norm();
          at = 0.5 * (a + b);
        }
      }
    }
    throw MeshingError("meshing exceeded the 1.5*h edge-length bound: edge " + std::to_string(worst) +
                       " near (" + std::to_string(at.x()) + "," + std::to_string(at.y()) + ")");
  }
  return mesh;
}

}  // namespace ischem
