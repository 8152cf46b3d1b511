#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ischem/mesh.hpp"

namespace ischem::testing {

/// Unit right triangle (0,0)-(1,0)-(0,1), all edges tagged EPI.
inline Mesh unit_right_triangle() {
  return Mesh({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}},
              {{0, 1, 2}},
              {{0, 1, BoundaryRegion::EPI}, {1, 2, BoundaryRegion::EPI}, {2, 0, BoundaryRegion::EPI}});
}

/// Two-triangle unit square.
inline Mesh unit_square_two_triangles() {
  return Mesh({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}},
              {{0, 1, 2}, {0, 2, 3}},
              {{0, 1, BoundaryRegion::EPI},
               {1, 2, BoundaryRegion::EPI},
               {2, 3, BoundaryRegion::EPI},
               {3, 0, BoundaryRegion::EPI}});
}

/// Deterministic pseudo-random doubles in [0,1).
class Rand01 {
 public:
  explicit Rand01(std::uint64_t seed) : state_(seed) {}
  double next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return double(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ischem::testing
