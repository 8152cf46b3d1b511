#include "ischem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace ischem {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  double t = (p - a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

const char* to_string(BoundaryRegion r) {
  switch (r) {
    case BoundaryRegion::EPI: return "EPI";
    case BoundaryRegion::ENDO_LV: return "ENDO_LV";
    case BoundaryRegion::ENDO_RV: return "ENDO_RV";
  }
  return "?";
}

BoundaryRegion boundary_region_from_string(const std::string& s) {
  if (s == "EPI") return BoundaryRegion::EPI;
  if (s == "ENDO_LV") return BoundaryRegion::ENDO_LV;
  if (s == "ENDO_RV") return BoundaryRegion::ENDO_RV;
  throw ParseError("unknown boundary region tag '" + s + "'");
}

std::string RegionSet::str() const {
  std::string out;
  for (auto r : {BoundaryRegion::EPI, BoundaryRegion::ENDO_LV, BoundaryRegion::ENDO_RV}) {
    if (!contains(r)) continue;
    if (!out.empty()) out += ",";
    out += to_string(r);
  }
  return out;
}

RegionSet RegionSet::parse(const std::string& comma_list) {
  RegionSet set;
  std::stringstream ss(comma_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = item.find_last_not_of(" \t");
    set.insert(boundary_region_from_string(item.substr(begin, end - begin + 1)));
  }
  return set;
}

std::vector<ValidationIssue> validate(const std::vector<Vec2>& nodes,
                                      const std::vector<std::array<int, 3>>& triangles,
                                      const std::vector<BoundaryEdge>& boundary_edges) {
  using Kind = ValidationIssue::Kind;
  std::vector<ValidationIssue> issues;
  const int n = static_cast<int>(nodes.size());

  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(nodes[size_t(i)].x()) || !std::isfinite(nodes[size_t(i)].y())) {
      issues.push_back({Kind::NonFiniteCoordinate, "node " + std::to_string(i) + " has a non-finite coordinate"});
    }
  }

  bool indices_ok = true;
  for (size_t e = 0; e < triangles.size(); ++e) {
    for (int v : triangles[e]) {
      if (v < 0 || v >= n) {
        issues.push_back({Kind::IndexOutOfRange,
                          "triangle " + std::to_string(e) + " references node " + std::to_string(v)});
        indices_ok = false;
      }
    }
  }
  for (size_t k = 0; k < boundary_edges.size(); ++k) {
    const auto& be = boundary_edges[k];
    if (be.a < 0 || be.a >= n || be.b < 0 || be.b >= n || be.a == be.b) {
      issues.push_back({Kind::IndexOutOfRange,
                        "boundary edge " + std::to_string(k) + " has invalid node indices"});
      indices_ok = false;
    }
  }
  if (!indices_ok) return issues;

  for (size_t e = 0; e < triangles.size(); ++e) {
    const auto& t = triangles[e];
    const double area = signed_area(nodes[size_t(t[0])], nodes[size_t(t[1])], nodes[size_t(t[2])]);
    if (!(area > 0.0)) {
      issues.push_back({Kind::NonPositiveArea,
                        "triangle " + std::to_string(e) + " has non-positive signed area " + std::to_string(area)});
    }
  }

  // Conformity: every directed edge appears at most once; each undirected
  // edge is shared by exactly two triangles (with opposite orientations) or
  // lies on the boundary.
  std::map<std::pair<int, int>, int> directed_count;
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      directed_count[{t[size_t(k)], t[size_t((k + 1) % 3)]}]++;
    }
  }
  std::map<std::pair<int, int>, int> undirected_count;
  for (const auto& [edge, cnt] : directed_count) {
    if (cnt > 1) {
      issues.push_back({Kind::NonConforming,
                        "directed edge (" + std::to_string(edge.first) + "," + std::to_string(edge.second) +
                            ") appears in " + std::to_string(cnt) + " triangles"});
    }
    auto key = std::minmax(edge.first, edge.second);
    undirected_count[{key.first, key.second}] += cnt;
  }
  std::vector<std::pair<int, int>> hull;  // directed, domain on the left
  for (const auto& [edge, cnt] : undirected_count) {
    if (cnt > 2) {
      issues.push_back({Kind::NonConforming,
                        "edge {" + std::to_string(edge.first) + "," + std::to_string(edge.second) +
                            "} shared by " + std::to_string(cnt) + " triangles"});
    } else if (cnt == 1) {
      // Recover orientation of the single incident triangle.
      if (directed_count.count(edge)) {
        hull.push_back(edge);
      } else {
        hull.push_back({edge.second, edge.first});
      }
    }
  }

  // Boundary edges must coincide with the topological boundary, once each.
  std::map<std::pair<int, int>, BoundaryRegion> tagged;
  for (const auto& be : boundary_edges) {
    if (tagged.count({be.a, be.b}) || tagged.count({be.b, be.a})) {
      issues.push_back({Kind::BoundaryMismatch,
                        "boundary edge (" + std::to_string(be.a) + "," + std::to_string(be.b) + ") tagged twice"});
      continue;
    }
    tagged[{be.a, be.b}] = be.region;
  }
  for (const auto& edge : hull) {
    const bool fwd = tagged.count(edge) > 0;
    const bool rev = tagged.count({edge.second, edge.first}) > 0;
    if (!fwd && !rev) {
      issues.push_back({Kind::BoundaryMismatch,
                        "topological boundary edge (" + std::to_string(edge.first) + "," +
                            std::to_string(edge.second) + ") carries no region tag"});
    } else if (!fwd && rev) {
      issues.push_back({Kind::BoundaryOrientation,
                        "boundary edge (" + std::to_string(edge.second) + "," + std::to_string(edge.first) +
                            ") is oriented against its triangle"});
    }
  }
  if (tagged.size() != hull.size()) {
    issues.push_back({Kind::BoundaryMismatch,
                      "mesh lists " + std::to_string(tagged.size()) + " boundary edges but the topological boundary has " +
                          std::to_string(hull.size())});
  }
  return issues;
}

std::vector<ValidationIssue> validate(const Mesh& mesh) {
  return validate(mesh.nodes(), mesh.triangles(), mesh.boundary_edges());
}

Mesh::Mesh(std::vector<Vec2> nodes,
           std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges,
           std::vector<int> element_markers)
    : nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)),
      element_markers_(std::move(element_markers)) {
  auto issues = validate(nodes_, triangles_, boundary_edges_);
  if (!issues.empty()) {
    throw ValidationError("invalid mesh: " + issues.front().message +
                          (issues.size() > 1 ? " (+" + std::to_string(issues.size() - 1) + " more)" : ""));
  }
  if (!element_markers_.empty() && element_markers_.size() != triangles_.size()) {
    throw ValidationError("element_markers size does not match triangle count");
  }

  areas_.resize(triangles_.size());
  node_tris_.resize(nodes_.size());
  node_nbrs_.resize(nodes_.size());
  for (size_t e = 0; e < triangles_.size(); ++e) {
    const auto& t = triangles_[e];
    areas_[e] = signed_area(nodes_[size_t(t[0])], nodes_[size_t(t[1])], nodes_[size_t(t[2])]);
    total_area_ += areas_[e];
    for (int k = 0; k < 3; ++k) {
      node_tris_[size_t(t[size_t(k)])].push_back(static_cast<int>(e));
      const int u = t[size_t(k)];
      const int v = t[size_t((k + 1) % 3)];
      node_nbrs_[size_t(u)].push_back(v);
      node_nbrs_[size_t(v)].push_back(u);
    }
  }
  for (auto& nbrs : node_nbrs_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
}

Vec2 Mesh::centroid(int e) const {
  const auto& t = triangles_[size_t(e)];
  return (nodes_[size_t(t[0])] + nodes_[size_t(t[1])] + nodes_[size_t(t[2])]) / 3.0;
}

double Mesh::max_edge_length() const {
  double m = 0.0;
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) {
      m = std::max(m, (nodes_[size_t(t[size_t(k)])] - nodes_[size_t(t[size_t((k + 1) % 3)])]).norm());
    }
  }
  return m;
}

bool Mesh::region_present(BoundaryRegion r) const {
  return std::any_of(boundary_edges_.begin(), boundary_edges_.end(),
                     [r](const BoundaryEdge& be) { return be.region == r; });
}

std::vector<int> Mesh::region_nodes(RegionSet set) const {
  std::vector<int> ids;
  for (const auto& be : boundary_edges_) {
    if (!set.contains(be.region)) continue;
    ids.push_back(be.a);
    ids.push_back(be.b);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

double Mesh::boundary_length(RegionSet set) const {
  double len = 0.0;
  for (const auto& be : boundary_edges_) {
    if (set.contains(be.region)) len += (nodes_[size_t(be.a)] - nodes_[size_t(be.b)]).norm();
  }
  return len;
}

double Mesh::distance_to_boundary(const Vec2& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& be : boundary_edges_) {
    d = std::min(d, point_segment_distance(p, nodes_[size_t(be.a)], nodes_[size_t(be.b)]));
  }
  return d;
}

bool Mesh::contains(const Vec2& p) const {
  for (size_t e = 0; e < triangles_.size(); ++e) {
    const auto& t = triangles_[e];
    const Vec2& a = nodes_[size_t(t[0])];
    const Vec2& b = nodes_[size_t(t[1])];
    const Vec2& c = nodes_[size_t(t[2])];
    const double tol = -1e-12 * std::max(1.0, areas_[e]);
    if (signed_area(a, b, p) >= tol && signed_area(b, c, p) >= tol && signed_area(c, a, p) >= tol) {
      return true;
    }
  }
  return false;
}

int Mesh::nearest_node(const Vec2& p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < node_count(); ++i) {
    const double d = (nodes_[size_t(i)] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path.string() + "'");

  int line_no = 0;
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  if (!next_line(line) || line.rfind("mesh 2d v1", 0) != 0) throw fail("expected header 'mesh 2d v1'");

  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary;

  if (!next_line(line)) throw fail("expected 'nodes N'");
  {
    std::istringstream ss(line);
    std::string kw;
    long n = -1;
    if (!(ss >> kw >> n) || kw != "nodes" || n < 0) throw fail("expected 'nodes N'");
    nodes.reserve(size_t(n));
    for (long i = 0; i < n; ++i) {
      if (!next_line(line)) throw fail("unexpected end of file in node list");
      std::istringstream ls(line);
      double x, y;
      if (!(ls >> x >> y)) throw fail("expected 'x y'");
      nodes.emplace_back(x, y);
    }
  }

  if (!next_line(line)) throw fail("expected 'triangles M'");
  {
    std::istringstream ss(line);
    std::string kw;
    long m = -1;
    if (!(ss >> kw >> m) || kw != "triangles" || m < 0) throw fail("expected 'triangles M'");
    triangles.reserve(size_t(m));
    for (long i = 0; i < m; ++i) {
      if (!next_line(line)) throw fail("unexpected end of file in triangle list");
      std::istringstream ls(line);
      int a, b, c;
      if (!(ls >> a >> b >> c)) throw fail("expected 'i j k'");
      triangles.push_back({a, b, c});
    }
  }

  if (!next_line(line)) throw fail("expected 'boundary B'");
  {
    std::istringstream ss(line);
    std::string kw;
    long bcount = -1;
    if (!(ss >> kw >> bcount) || kw != "boundary" || bcount < 0) throw fail("expected 'boundary B'");
    boundary.reserve(size_t(bcount));
    for (long i = 0; i < bcount; ++i) {
      if (!next_line(line)) throw fail("unexpected end of file in boundary list");
      std::istringstream ls(line);
      int a, b;
      std::string tag;
      if (!(ls >> a >> b >> tag)) throw fail("expected 'i j TAG'");
      BoundaryEdge be;
      be.a = a;
      be.b = b;
      try {
        be.region = boundary_region_from_string(tag);
      } catch (const ParseError&) {
        throw fail("unknown region tag '" + tag + "'");
      }
      boundary.push_back(be);
    }
  }

  return Mesh(std::move(nodes), std::move(triangles), std::move(boundary));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  char buf[96];
  out << "mesh 2d v1\n";
  out << "nodes " << mesh.node_count() << "\n";
  for (const auto& p : mesh.nodes()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
    out << buf;
  }
  out << "triangles " << mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles()) {
    out << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  out << "boundary " << mesh.boundary_edges().size() << "\n";
  for (const auto& be : mesh.boundary_edges()) {
    out << be.a << " " << be.b << " " << to_string(be.region) << "\n";
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

double VentricleGeometry::signed_distance(const Vec2& p) const {
  const double outer = std::min((p - outer_center_a).norm() - outer_radius_a,
                                (p - outer_center_b).norm() - outer_radius_b);
  const double lv = lv_radius - (p - lv_center).norm();
  const double rv = rv_radius - (p - rv_center).norm();
  return std::max({outer, lv, rv});
}

void VentricleGeometry::check() const {
  if (outer_radius_a <= 0 || outer_radius_b <= 0 || lv_radius <= 0 || rv_radius <= 0) {
    throw GeometryError("all radii must be positive");
  }
  const double min_wall = 0.05;
  auto cavity_inside_outer = [&](const Vec2& c, double r, const char* name) {
    const int samples = 256;
    for (int k = 0; k < samples; ++k) {
      const double th = 2.0 * M_PI * k / samples;
      const Vec2 p = c + r * Vec2(std::cos(th), std::sin(th));
      const double outer = std::min((p - outer_center_a).norm() - outer_radius_a,
                                    (p - outer_center_b).norm() - outer_radius_b);
      if (outer > -min_wall) {
        throw GeometryError(std::string(name) + " cavity is not strictly inside the outer contour");
      }
    }
  };
  cavity_inside_outer(lv_center, lv_radius, "LV");
  cavity_inside_outer(rv_center, rv_radius, "RV");
  if ((lv_center - rv_center).norm() < lv_radius + rv_radius + min_wall) {
    throw GeometryError("LV and RV cavities overlap or touch");
  }
  // The outer contour must be a single closed curve: the two disks overlap
  // but neither contains the other.
  const double d = (outer_center_a - outer_center_b).norm();
  if (d >= outer_radius_a + outer_radius_b) {
    throw GeometryError("outer disks are disjoint; the section must be connected");
  }
  if (d + outer_radius_b <= outer_radius_a || d + outer_radius_a <= outer_radius_b) {
    throw GeometryError("one outer disk contains the other; expected two overlapping disks");
  }
}

Mesh make_rect_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny, BoundaryRegion tag) {
  if (nx < 1 || ny < 1 || hi.x() <= lo.x() || hi.y() <= lo.y()) {
    throw GeometryError("invalid rectangle mesh parameters");
  }
  std::vector<Vec2> nodes;
  nodes.reserve(size_t((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      nodes.emplace_back(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny);
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(size_t(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      // Alternate the diagonal for isotropy.
      if ((i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  std::vector<BoundaryEdge> bnd;
  for (int i = 0; i < nx; ++i) bnd.push_back({id(i, 0), id(i + 1, 0), tag});
  for (int j = 0; j < ny; ++j) bnd.push_back({id(nx, j), id(nx, j + 1), tag});
  for (int i = nx; i > 0; --i) bnd.push_back({id(i, ny), id(i - 1, ny), tag});
  for (int j = ny; j > 0; --j) bnd.push_back({id(0, j), id(0, j - 1), tag});
  return Mesh(std::move(nodes), std::move(tris), std::move(bnd));
}

Mesh make_annulus_mesh(double inner_radius, double outer_radius, double h,
                       BoundaryRegion inner_tag, BoundaryRegion outer_tag) {
  if (!(0 < inner_radius && inner_radius < outer_radius) || h <= 0) {
    throw GeometryError("invalid annulus parameters");
  }
  const int nr = std::max(2, int(std::lround((outer_radius - inner_radius) / h)));
  const int nt = std::max(8, int(std::lround(M_PI * (inner_radius + outer_radius) / h)));
  std::vector<Vec2> nodes;
  nodes.reserve(size_t((nr + 1) * nt));
  for (int k = 0; k <= nr; ++k) {
    const double r = inner_radius + (outer_radius - inner_radius) * k / nr;
    for (int j = 0; j < nt; ++j) {
      const double th = 2.0 * M_PI * j / nt;
      nodes.emplace_back(r * std::cos(th), r * std::sin(th));
    }
  }
  auto id = [nt](int k, int j) { return k * nt + ((j % nt + nt) % nt); };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(size_t(2 * nr * nt));
  for (int k = 0; k < nr; ++k) {
    for (int j = 0; j < nt; ++j) {
      // CCW in physical coordinates: radially out first, then along the ring.
      const int a = id(k, j), b = id(k + 1, j), c = id(k + 1, j + 1), d = id(k, j + 1);
      if ((k + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  std::vector<BoundaryEdge> bnd;
  // Inner circle: domain on the left means clockwise traversal.
  for (int j = 0; j < nt; ++j) bnd.push_back({id(0, j + 1), id(0, j), inner_tag});
  for (int j = 0; j < nt; ++j) bnd.push_back({id(nr, j), id(nr, j + 1), outer_tag});
  return Mesh(std::move(nodes), std::move(tris), std::move(bnd));
}

}  // namespace ischem
