#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ischem {

using Vec2 = Eigen::Vector2d;

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error { public: using Error::Error; };
class MeshingError  : public Error { public: using Error::Error; };
class ParseError    : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class ConfigError   : public Error { public: using Error::Error; };
class SolverError   : public Error { public: using Error::Error; };
class ParamError    : public Error { public: using Error::Error; };

/// Labeled parts of the domain boundary: the outer surface and the two
/// cavity surfaces. Every boundary edge carries exactly one tag.
enum class BoundaryRegion : std::uint8_t { EPI = 0, ENDO_LV = 1, ENDO_RV = 2 };

const char* to_string(BoundaryRegion r);
BoundaryRegion boundary_region_from_string(const std::string& s);

/// Small set of boundary regions, used to select measurement supports.
class RegionSet {
 public:
  RegionSet() = default;
  RegionSet(std::initializer_list<BoundaryRegion> regions) {
    for (auto r : regions) insert(r);
  }
  static RegionSet all() { return {BoundaryRegion::EPI, BoundaryRegion::ENDO_LV, BoundaryRegion::ENDO_RV}; }

  void insert(BoundaryRegion r) { bits_ |= bit(r); }
  bool contains(BoundaryRegion r) const { return bits_ & bit(r); }
  bool empty() const { return bits_ == 0; }
  bool operator==(const RegionSet&) const = default;

  std::string str() const;
  static RegionSet parse(const std::string& comma_list);

 private:
  static std::uint8_t bit(BoundaryRegion r) { return std::uint8_t(1u << static_cast<unsigned>(r)); }
  std::uint8_t bits_ = 0;
};

struct BoundaryEdge {
  int a = -1;  ///< first node, oriented so the domain lies on the left
  int b = -1;
  BoundaryRegion region = BoundaryRegion::EPI;
};

struct ValidationIssue {
  enum class Kind {
    NonFiniteCoordinate,
    IndexOutOfRange,
    NonPositiveArea,
    NonConforming,
    BoundaryMismatch,
    BoundaryOrientation,
  };
  Kind kind;
  std::string message;
};

/// Conforming 2D triangulation with tagged boundary edges. Immutable after
/// construction; cheap to share read-only between threads.
class Mesh {
 public:
  /// Validates the input (throws ValidationError on the first violated
  /// invariant) and builds adjacency tables.
  Mesh(std::vector<Vec2> nodes,
       std::vector<std::array<int, 3>> triangles,
       std::vector<BoundaryEdge> boundary_edges,
       std::vector<int> element_markers = {});

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<int>& element_markers() const { return element_markers_; }

  const Vec2& node(int i) const { return nodes_[size_t(i)]; }
  const std::array<int, 3>& triangle(int e) const { return triangles_[size_t(e)]; }

  double triangle_area(int e) const { return areas_[size_t(e)]; }
  Vec2 centroid(int e) const;
  double total_area() const { return total_area_; }

  /// Longest edge over all triangles.
  double max_edge_length() const;

  /// Triangles incident to each node.
  const std::vector<std::vector<int>>& node_to_triangles() const { return node_tris_; }
  /// Node-to-node adjacency (undirected edges of the triangulation).
  const std::vector<std::vector<int>>& node_neighbors() const { return node_nbrs_; }

  bool region_present(BoundaryRegion r) const;
  /// Sorted ids of the nodes incident to at least one edge of the set.
  std::vector<int> region_nodes(RegionSet set) const;
  double boundary_length(RegionSet set) const;

  /// Euclidean distance from p to the polygonal boundary.
  double distance_to_boundary(const Vec2& p) const;
  /// Point-in-mesh test (inside or on some triangle).
  bool contains(const Vec2& p) const;
  /// Index of the node closest to p.
  int nearest_node(const Vec2& p) const;

 private:
  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<int> element_markers_;
  std::vector<double> areas_;
  std::vector<std::vector<int>> node_tris_;
  std::vector<std::vector<int>> node_nbrs_;
  double total_area_ = 0.0;
};

/// Reports every violated mesh invariant (empty result means valid). Works on
/// raw arrays so that invalid data can be inspected without constructing a Mesh.
std::vector<ValidationIssue> validate(const std::vector<Vec2>& nodes,
                                      const std::vector<std::array<int, 3>>& triangles,
                                      const std::vector<BoundaryEdge>& boundary_edges);
std::vector<ValidationIssue> validate(const Mesh& mesh);

/// Plain-text mesh file, format `mesh 2d v1` (see README).
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Idealized ventricular cross-section: the union of two overlapping outer
/// disks with two disk-shaped cavities (left and right ventricle).
struct VentricleGeometry {
  Vec2 outer_center_a{0.0, 0.0};
  double outer_radius_a = 3.0;   // cm
  Vec2 outer_center_b{2.4, 0.0};
  double outer_radius_b = 2.2;
  Vec2 lv_center{-0.8, 0.0};
  double lv_radius = 1.5;
  Vec2 rv_center{2.7, 0.0};
  double rv_radius = 1.0;

  /// Signed distance to the domain (negative inside).
  double signed_distance(const Vec2& p) const;
  /// Throws GeometryError when the cavities overlap, touch each other or
  /// reach the outer contour.
  void check() const;
};

/// Local mesh-size override: target edge length `h` inside the disk, graded
/// back to the base size outside.
struct RefinementDisk {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
  double h = 0.0;
};

/// Unstructured triangulation of the ventricle section with boundary loops
/// tagged EPI / ENDO_LV / ENDO_RV. Deterministic for fixed inputs.
Mesh generate_ventricle_section(const VentricleGeometry& geometry, double h,
                                const std::vector<RefinementDisk>& refinement = {});

/// Structured mesh of an axis-aligned rectangle, all boundary edges tagged
/// `tag`. nx, ny are the cell counts per direction.
Mesh make_rect_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny,
                    BoundaryRegion tag = BoundaryRegion::EPI);

/// Structured polar mesh of the annulus a <= r <= b.
Mesh make_annulus_mesh(double inner_radius, double outer_radius, double h,
                       BoundaryRegion inner_tag = BoundaryRegion::ENDO_LV,
                       BoundaryRegion outer_tag = BoundaryRegion::EPI);

}  // namespace ischem
