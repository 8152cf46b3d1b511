#include "delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ischem::detail {

namespace {

struct Tri {
  std::array<int, 3> v;    // CCW vertices
  std::array<int, 3> nbr;  // nbr[k] shares the edge opposite v[k]; -1 outside
  bool alive = true;
};

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when d is strictly inside the circumcircle of CCW triangle (a,b,c).
// Returns 0 within a scale-aware tolerance band, so cocircular quadruples do
// not trigger flips.
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  const double det = adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
                     ad2 * (bdx * cdy - cdx * bdy);
  const double mag = std::abs(adx * bdy * cd2) + std::abs(adx * cdy * bd2) +
                     std::abs(ady * bdx * cd2) + std::abs(ady * cdx * bd2) +
                     std::abs(ad2 * bdx * cdy) + std::abs(ad2 * cdx * bdy);
  if (std::abs(det) <= 1e-12 * mag) return 0.0;
  return det;
}

class Triangulation {
 public:
  explicit Triangulation(const std::vector<Vec2>& points) : pts_(points) {
    Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    Vec2 hi = -lo;
    for (const auto& p : pts_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec2 mid = 0.5 * (lo + hi);
    const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1.0});
    scale_ = span;
    n_real_ = static_cast<int>(pts_.size());
    // Bounding super-triangle, appended after the real points.
    pts_.push_back(mid + Vec2(-20.0 * span, -12.0 * span));
    pts_.push_back(mid + Vec2(20.0 * span, -12.0 * span));
    pts_.push_back(mid + Vec2(0.0, 24.0 * span));
    tris_.push_back({{n_real_, n_real_ + 1, n_real_ + 2}, {-1, -1, -1}, true});
  }

  void insert_all() {
    int hint = 0;
    for (int i = 0; i < n_real_; ++i) hint = insert(i, hint);
  }

  std::vector<std::array<int, 3>> real_triangles() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n_real_ || t.v[1] >= n_real_ || t.v[2] >= n_real_) continue;
      out.push_back(t.v);
    }
    return out;
  }

 private:
  const Vec2& P(int i) const { return pts_[size_t(i)]; }

  double eps_orient() const { return 1e-13 * scale_ * scale_; }

  // Walk from the hint toward p. Returns a triangle containing p and the
  // index (0..2) of an edge p lies on, or -1 for strict interior.
  std::pair<int, int> locate(const Vec2& p, int hint) const {
    int t = hint;
    if (t < 0 || t >= int(tris_.size()) || !tris_[size_t(t)].alive) t = first_alive();
    const int cap = 4 * int(tris_.size()) + 64;
    for (int step = 0; step < cap; ++step) {
      const Tri& tri = tris_[size_t(t)];
      int cross_edge = -1;
      double worst = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int u = tri.v[size_t((k + 1) % 3)];
        const int w = tri.v[size_t((k + 2) % 3)];
        const double o = orient(P(u), P(w), p);
        if (o < -eps_orient() && tri.nbr[size_t(k)] >= 0 && o < worst) {
          worst = o;
          cross_edge = k;
        }
      }
      if (cross_edge < 0) {
        for (int k = 0; k < 3; ++k) {
          const int u = tri.v[size_t((k + 1) % 3)];
          const int w = tri.v[size_t((k + 2) % 3)];
          if (std::abs(orient(P(u), P(w), p)) <= eps_orient()) return {t, k};
        }
        return {t, -1};
      }
      t = tri.nbr[size_t(cross_edge)];
    }
    return exhaustive_locate(p);
  }

  std::pair<int, int> exhaustive_locate(const Vec2& p) const {
    for (int t = 0; t < int(tris_.size()); ++t) {
      const Tri& tri = tris_[size_t(t)];
      if (!tri.alive) continue;
      bool inside = true;
      int on_edge = -1;
      for (int k = 0; k < 3; ++k) {
        const int u = tri.v[size_t((k + 1) % 3)];
        const int w = tri.v[size_t((k + 2) % 3)];
        const double o = orient(P(u), P(w), p);
        if (o < -eps_orient()) {
          inside = false;
          break;
        }
        if (std::abs(o) <= eps_orient()) on_edge = k;
      }
      if (inside) return {t, on_edge};
    }
    throw MeshingError("Delaunay point location failed");
  }

  int first_alive() const {
    for (int t = int(tris_.size()) - 1; t >= 0; --t) {
      if (tris_[size_t(t)].alive) return t;
    }
    throw MeshingError("empty triangulation");
  }

  static int nbr_index_in(const Tri& tri, int other) {
    for (int k = 0; k < 3; ++k) {
      if (tri.nbr[size_t(k)] == other) return k;
    }
    throw MeshingError("triangulation adjacency corrupted");
  }

  void set_nbr(int t, int edge, int other) { tris_[size_t(t)].nbr[size_t(edge)] = other; }

  void replace_nbr(int t, int old_nbr, int new_nbr) {
    if (t < 0) return;
    tris_[size_t(t)].nbr[size_t(nbr_index_in(tris_[size_t(t)], old_nbr))] = new_nbr;
  }

  int add_tri(std::array<int, 3> v, std::array<int, 3> nbr) {
    tris_.push_back({v, nbr, true});
    return int(tris_.size()) - 1;
  }

  int insert(int i, int hint) {
    const auto [t, on_edge] = locate(P(i), hint);
    for (int v : tris_[size_t(t)].v) {
      if ((P(v) - P(i)).norm() < 1e-12 * scale_) {
        throw MeshingError("duplicate point passed to the triangulator");
      }
    }
    std::vector<std::pair<int, int>> todo;  // (triangle, edge opposite the new vertex)
    if (on_edge < 0) {
      split_triangle(t, i, todo);
    } else {
      split_edge(t, on_edge, i, todo);
    }
    while (!todo.empty()) {
      auto [tt, k] = todo.back();
      todo.pop_back();
      legalize(tt, k, todo);
    }
    return int(tris_.size()) - 1;
  }

  void split_triangle(int t, int i, std::vector<std::pair<int, int>>& todo) {
    const Tri old = tris_[size_t(t)];
    tris_[size_t(t)].alive = false;
    const int a = old.v[0], b = old.v[1], c = old.v[2];
    const int t0 = add_tri({i, a, b}, {old.nbr[2], -1, -1});
    const int t1 = add_tri({i, b, c}, {old.nbr[0], -1, -1});
    const int t2 = add_tri({i, c, a}, {old.nbr[1], -1, -1});
    set_nbr(t0, 1, t1);
    set_nbr(t0, 2, t2);
    set_nbr(t1, 1, t2);
    set_nbr(t1, 2, t0);
    set_nbr(t2, 1, t0);
    set_nbr(t2, 2, t1);
    replace_nbr(old.nbr[2], t, t0);
    replace_nbr(old.nbr[0], t, t1);
    replace_nbr(old.nbr[1], t, t2);
    todo.insert(todo.end(), {{t0, 0}, {t1, 0}, {t2, 0}});
  }

  // Split the edge opposite vertex k of triangle t at point i. The edge is
  // shared with at most one other triangle; both are replaced by two each.
  void split_edge(int t, int k, int i, std::vector<std::pair<int, int>>& todo) {
    const Tri old = tris_[size_t(t)];
    const int a = old.v[size_t(k)];
    const int u = old.v[size_t((k + 1) % 3)];
    const int w = old.v[size_t((k + 2) % 3)];
    const int ta = old.nbr[size_t(k)];
    tris_[size_t(t)].alive = false;

    // (a,u,w) splits into (a,u,i) and (a,i,w); stored with i first.
    const int t0 = add_tri({i, a, u}, {old.nbr[size_t((k + 2) % 3)], -1, -1});
    const int t1 = add_tri({i, w, a}, {old.nbr[size_t((k + 1) % 3)], -1, -1});
    set_nbr(t0, 2, t1);
    set_nbr(t1, 1, t0);
    replace_nbr(old.nbr[size_t((k + 2) % 3)], t, t0);
    replace_nbr(old.nbr[size_t((k + 1) % 3)], t, t1);
    todo.insert(todo.end(), {{t0, 0}, {t1, 0}});

    if (ta < 0) {
      set_nbr(t0, 1, -1);
      set_nbr(t1, 2, -1);
      return;
    }
    const Tri olda = tris_[size_t(ta)];
    tris_[size_t(ta)].alive = false;
    const int ka = nbr_index_in(olda, t);
    const int d = olda.v[size_t(ka)];  // far apex; the shared edge reads (w,u) there
    const int t2 = add_tri({i, u, d}, {olda.nbr[size_t((ka + 1) % 3)], -1, -1});
    const int t3 = add_tri({i, d, w}, {olda.nbr[size_t((ka + 2) % 3)], -1, -1});
    set_nbr(t2, 2, t0);
    set_nbr(t0, 1, t2);
    set_nbr(t2, 1, t3);
    set_nbr(t3, 2, t2);
    set_nbr(t3, 1, t1);
    set_nbr(t1, 2, t3);
    replace_nbr(olda.nbr[size_t((ka + 1) % 3)], ta, t2);
    replace_nbr(olda.nbr[size_t((ka + 2) % 3)], ta, t3);
    todo.insert(todo.end(), {{t2, 0}, {t3, 0}});
  }

  // Delaunay edge legalization with a convexity guard: a flip is performed
  // only when both resulting triangles stay CCW, so the structure remains a
  // valid triangulation even under ambiguous predicates.
  void legalize(int t, int k, std::vector<std::pair<int, int>>& todo) {
    if (!tris_[size_t(t)].alive) return;
    const Tri tri = tris_[size_t(t)];
    const int ta = tri.nbr[size_t(k)];
    if (ta < 0) return;
    const Tri tria = tris_[size_t(ta)];
    const int p = tri.v[size_t(k)];
    const int u = tri.v[size_t((k + 1) % 3)];
    const int w = tri.v[size_t((k + 2) % 3)];
    const int ka = nbr_index_in(tria, t);
    const int d = tria.v[size_t(ka)];

    if (incircle(P(p), P(u), P(w), P(d)) <= 0.0) return;
    if (orient(P(p), P(u), P(d)) <= eps_orient()) return;
    if (orient(P(p), P(d), P(w)) <= eps_orient()) return;

    const int n_pu = tri.nbr[size_t((k + 2) % 3)];
    const int n_wp = tri.nbr[size_t((k + 1) % 3)];
    const int n_ud = tria.nbr[size_t((ka + 1) % 3)];
    const int n_dw = tria.nbr[size_t((ka + 2) % 3)];

    tris_[size_t(t)].alive = false;
    tris_[size_t(ta)].alive = false;
    const int f0 = add_tri({p, u, d}, {n_ud, -1, n_pu});
    const int f1 = add_tri({p, d, w}, {n_dw, n_wp, -1});
    set_nbr(f0, 1, f1);
    set_nbr(f1, 2, f0);
    replace_nbr(n_pu, t, f0);
    replace_nbr(n_wp, t, f1);
    replace_nbr(n_ud, ta, f0);
    replace_nbr(n_dw, ta, f1);
    todo.insert(todo.end(), {{f0, 0}, {f1, 0}});
  }

  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  int n_real_ = 0;
  double scale_ = 1.0;
};

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points) {
  if (points.size() < 3) throw MeshingError("need at least 3 points to triangulate");
  Triangulation tr(points);
  tr.insert_all();
  auto tris = tr.real_triangles();
  if (tris.empty()) throw MeshingError("triangulation produced no triangles (degenerate input?)");
  return tris;
}

}  // namespace ischem::detail
