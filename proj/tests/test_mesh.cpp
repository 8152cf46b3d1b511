#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ischem/mesh.hpp"
#include "support.hpp"

using namespace ischem;

namespace {

// Area of the default section: union of the two outer disks minus cavities.
double analytic_domain_area(const VentricleGeometry& g) {
  const double d = (g.outer_center_a - g.outer_center_b).norm();
  const double r = g.outer_radius_a, R = g.outer_radius_b;
  const double cos_a = (d * d + r * r - R * R) / (2 * d * r);
  const double cos_b = (d * d + R * R - r * r) / (2 * d * R);
  const double lens = r * r * std::acos(cos_a) + R * R * std::acos(cos_b) -
                      0.5 * std::sqrt((-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R));
  const double outer = M_PI * r * r + M_PI * R * R - lens;
  return outer - M_PI * g.lv_radius * g.lv_radius - M_PI * g.rv_radius * g.rv_radius;
}

int boundary_loop_count(const Mesh& mesh) {
  // Walk successor edges: each boundary node has exactly one outgoing edge.
  std::map<int, int> next;
  for (const auto& be : mesh.boundary_edges()) next[be.a] = be.b;
  std::set<int> seen;
  int loops = 0;
  for (const auto& [start, _] : next) {
    if (seen.count(start)) continue;
    ++loops;
    int v = start;
    do {
      seen.insert(v);
      v = next.at(v);
    } while (v != start);
  }
  return loops;
}

int euler_characteristic(const Mesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles()) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[size_t(k)], b = t[size_t((k + 1) % 3)];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return mesh.node_count() - int(edges.size()) + mesh.triangle_count();
}

}  // namespace

TEST_CASE("ventricle section: default geometry at h = 0.1") {
  const VentricleGeometry g;
  const Mesh mesh = generate_ventricle_section(g, 0.1);

  CHECK(validate(mesh).empty());
  CHECK(mesh.triangle_count() >= 5000);
  CHECK(mesh.triangle_count() <= 15000);
  CHECK(boundary_loop_count(mesh) == 3);
  CHECK(euler_characteristic(mesh) == -1);  // disk with two holes
  CHECK(mesh.max_edge_length() <= 1.5 * 0.1);

  const double area = analytic_domain_area(g);
  CHECK(std::abs(mesh.total_area() - area) / area < 0.005);

  for (auto r : {BoundaryRegion::EPI, BoundaryRegion::ENDO_LV, BoundaryRegion::ENDO_RV}) {
    CHECK(mesh.region_present(r));
  }
}

TEST_CASE("ventricle section: halving h roughly quadruples the triangle count") {
  const VentricleGeometry g;
  const Mesh coarse = generate_ventricle_section(g, 0.2);
  const Mesh fine = generate_ventricle_section(g, 0.1);
  CHECK(boundary_loop_count(coarse) == 3);
  CHECK(boundary_loop_count(fine) == 3);
  const double ratio = double(fine.triangle_count()) / double(coarse.triangle_count());
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("ventricle section: invalid cavity geometry is rejected") {
  VentricleGeometry g;
  g.lv_radius = g.outer_radius_a;  // cavity as large as the outer disk
  CHECK_THROWS_AS(generate_ventricle_section(g, 0.1), GeometryError);

  VentricleGeometry overlap;
  overlap.rv_center = overlap.lv_center + Vec2(0.5, 0.0);
  CHECK_THROWS_AS(generate_ventricle_section(overlap, 0.1), GeometryError);
}

TEST_CASE("mesh file round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ischem_mesh_test";
  fs::create_directories(dir);

  SUBCASE("two-triangle unit square is reproduced exactly") {
    const Mesh square = ischem::testing::unit_square_two_triangles();
    save_mesh(square, dir / "square.txt");
    const Mesh loaded = load_mesh(dir / "square.txt");
    CHECK(loaded.node_count() == square.node_count());
    CHECK(loaded.triangles() == square.triangles());
    for (int i = 0; i < square.node_count(); ++i) {
      CHECK(loaded.node(i) == square.node(i));
    }
    CHECK(loaded.boundary_edges().size() == square.boundary_edges().size());
  }

  SUBCASE("generated mesh round-trips with area preserved") {
    const Mesh mesh = generate_ventricle_section(VentricleGeometry{}, 0.2);
    save_mesh(mesh, dir / "ventricle.txt");
    const Mesh loaded = load_mesh(dir / "ventricle.txt");
    CHECK(std::abs(loaded.total_area() - mesh.total_area()) <= 1e-12 * mesh.total_area());
  }

  SUBCASE("out-of-range node index is a validation error") {
    std::ofstream out(dir / "broken.txt");
    out << "mesh 2d v1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\nboundary 3\n"
        << "0 1 EPI\n1 2 EPI\n2 0 EPI\n";
    out.close();
    CHECK_THROWS_AS(load_mesh(dir / "broken.txt"), ValidationError);
  }

  SUBCASE("malformed file reports a parse error with position") {
    std::ofstream out(dir / "malformed.txt");
    out << "mesh 2d v1\nnodes 2\n0 0\nnot-a-number 1\n";
    out.close();
    try {
      load_mesh(dir / "malformed.txt");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":4") != std::string::npos);
    }
  }
}

TEST_CASE("validate reports constructed violations") {
  SUBCASE("clockwise triangle") {
    const auto issues = validate({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {{0, 2, 1}},
                                 {{0, 1, BoundaryRegion::EPI},
                                  {1, 2, BoundaryRegion::EPI},
                                  {2, 0, BoundaryRegion::EPI}});
    REQUIRE(!issues.empty());
    bool orientation = false;
    for (const auto& i : issues) orientation |= i.kind == ValidationIssue::Kind::NonPositiveArea;
    CHECK(orientation);
  }

  SUBCASE("duplicated triangle breaks conformity") {
    const auto issues = validate({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {{0, 1, 2}, {0, 1, 2}},
                                 {{0, 1, BoundaryRegion::EPI},
                                  {1, 2, BoundaryRegion::EPI},
                                  {2, 0, BoundaryRegion::EPI}});
    REQUIRE(!issues.empty());
    bool conformity = false;
    for (const auto& i : issues) conformity |= i.kind == ValidationIssue::Kind::NonConforming;
    CHECK(conformity);
  }

  SUBCASE("valid meshes pass") {
    CHECK(validate(ischem::testing::unit_right_triangle()).empty());
    CHECK(validate(make_rect_mesh({0, 0}, {1, 1}, 4, 4)).empty());
    CHECK(validate(make_annulus_mesh(1.0, 2.0, 0.2)).empty());
  }
}

TEST_CASE("region tags partition the boundary") {
  const Mesh mesh = generate_ventricle_section(VentricleGeometry{}, 0.2);
  const auto epi = mesh.region_nodes({BoundaryRegion::EPI});
  const auto lv = mesh.region_nodes({BoundaryRegion::ENDO_LV});
  const auto rv = mesh.region_nodes({BoundaryRegion::ENDO_RV});
  std::set<int> all(epi.begin(), epi.end());
  for (int v : lv) CHECK(all.insert(v).second);  // disjoint loops
  for (int v : rv) CHECK(all.insert(v).second);
  CHECK(all.size() == mesh.region_nodes(RegionSet::all()).size());
}
