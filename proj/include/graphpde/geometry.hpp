#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphpde/errors.hpp"

namespace graphpde::geo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }

/// Measurement positions plus the bounding box of the domain they live in.
struct PointSet {
  std::vector<Vec2> coords;
  Vec2 domain_lo{0.0, 0.0};
  Vec2 domain_hi{1.0, 1.0};

  int size() const { return static_cast<int>(coords.size()); }
};

inline void validate_point_set(const PointSet& ps) {
  const int n = ps.size();
  require(n >= 3, ErrorCode::DegenerateInput, "need at least 3 points");
  for (const Vec2& p : ps.coords) {
    require(std::isfinite(p.x) && std::isfinite(p.y), ErrorCode::DegenerateInput,
            "non-finite coordinate");
    require(p.x >= ps.domain_lo.x && p.x <= ps.domain_hi.x && p.y >= ps.domain_lo.y &&
                p.y <= ps.domain_hi.y,
            ErrorCode::DegenerateInput, "point outside domain bounds");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec2 d = ps.coords[j] - ps.coords[i];
      if (std::hypot(d.x, d.y) < 1e-12) {
        raise(ErrorCode::DegenerateInput,
              "points " + std::to_string(i) + " and " + std::to_string(j) +
                  " coincide within 1e-12");
      }
    }
  }
}

struct Triangulation {
  std::vector<std::array<int, 3>> triangles;  // CCW, canonical vertex rotation
};

// ---------------------------------------------------------------------------
// Predicates. Signs are decided against a tolerance scaled by the magnitude
// of the determinant terms, so cocircular/collinear inputs land in a "tie"
// band instead of flipping on rounding noise.
// ---------------------------------------------------------------------------

inline constexpr double kInCircleTol = 1e-9;
inline constexpr double kOrientTol = 1e-12;

/// Twice the signed area of (a,b,c); > 0 for counterclockwise.
inline double orient2d_det(Vec2 a, Vec2 b, Vec2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline double orient2d_scale(Vec2 a, Vec2 b, Vec2 c) {
  return std::abs(b.x - a.x) * std::abs(c.y - a.y) +
         std::abs(b.y - a.y) * std::abs(c.x - a.x);
}

/// -1 / 0 / +1 with 0 meaning "collinear within tolerance".
inline int orient2d_sign(Vec2 a, Vec2 b, Vec2 c) {
  const double det = orient2d_det(a, b, c);
  const double band = kOrientTol * orient2d_scale(a, b, c);
  if (det > band) return 1;
  if (det < -band) return -1;
  return 0;
}

/// In-circle determinant: > 0 iff d lies strictly inside the circumcircle of
/// the CCW triangle (a,b,c). Returned alongside the magnitude scale used for
/// the tie band.
inline void incircle_det(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double* det, double* scale) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  *det = adx * (bdy * cd2 - bd2 * cdy) - ady * (bdx * cd2 - bd2 * cdx) +
         ad2 * (bdx * cdy - bdy * cdx);
  *scale = std::abs(adx) * (std::abs(bdy) * cd2 + bd2 * std::abs(cdy)) +
           std::abs(ady) * (std::abs(bdx) * cd2 + bd2 * std::abs(cdx)) +
           ad2 * (std::abs(bdx) * std::abs(cdy) + std::abs(bdy) * std::abs(cdx));
}

inline bool in_circle_strict(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  double det, scale;
  incircle_det(a, b, c, d, &det, &scale);
  return det > kInCircleTol * scale;
}

inline bool cocircular(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  double det, scale;
  incircle_det(a, b, c, d, &det, &scale);
  return std::abs(det) <= kInCircleTol * scale;
}

// ---------------------------------------------------------------------------
// Bowyer-Watson with a super-triangle. Points are inserted in ascending index
// order; the cavity is found by scanning all live triangles (O(N^2) total,
// fine at the node counts this toolkit targets). A final Lawson-style sweep
// canonicalizes cocircular quads: among equally valid diagonals the one whose
// lowest endpoint index is smallest wins, which pins the triangulation of
// degenerate inputs like square grids.
// ---------------------------------------------------------------------------

namespace detail {

struct Tri {
  int v[3];
  bool alive = true;
};

inline bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  return orient2d_sign(a, b, p) >= 0 && orient2d_sign(b, c, p) >= 0 &&
         orient2d_sign(c, a, p) >= 0;
}

}  // namespace detail

inline Triangulation delaunay(const PointSet& points) {
  validate_point_set(points);
  const int n = points.size();

  bool found_noncollinear = false;
  for (int i = 2; i < n && !found_noncollinear; ++i) {
    if (orient2d_sign(points.coords[0], points.coords[1], points.coords[i]) != 0)
      found_noncollinear = true;
  }
  require(found_noncollinear, ErrorCode::DegenerateInput, "all points collinear");

  // Working copy with three far-away super vertices appended.
  std::vector<Vec2> pts = points.coords;
  double lox = pts[0].x, hix = pts[0].x, loy = pts[0].y, hiy = pts[0].y;
  for (const Vec2& p : pts) {
    lox = std::min(lox, p.x);
    hix = std::max(hix, p.x);
    loy = std::min(loy, p.y);
    hiy = std::max(hiy, p.y);
  }
  const double cx = 0.5 * (lox + hix), cy = 0.5 * (loy + hiy);
  const double r = 1e4 * (std::max(hix - lox, hiy - loy) + 1.0);
  const int s0 = n, s1 = n + 1, s2 = n + 2;
  pts.push_back({cx - 3.0 * r, cy - r});
  pts.push_back({cx + 3.0 * r, cy - r});
  pts.push_back({cx, cy + 3.0 * r});

  std::vector<detail::Tri> tris;
  tris.push_back({{s0, s1, s2}, true});

  std::vector<int> cavity;
  std::map<std::pair<int, int>, std::pair<int, int>> boundary;  // sorted edge -> oriented
  for (int p = 0; p < n; ++p) {
    const Vec2 q = pts[p];
    cavity.clear();
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      if (!tris[t].alive) continue;
      if (in_circle_strict(pts[tris[t].v[0]], pts[tris[t].v[1]], pts[tris[t].v[2]], q))
        cavity.push_back(t);
    }
    if (cavity.empty()) {
      // Tolerance pushed a borderline containment out of the cavity; fall
      // back to the triangle that geometrically contains the point.
      for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        if (!tris[t].alive) continue;
        if (detail::point_in_triangle(q, pts[tris[t].v[0]], pts[tris[t].v[1]],
                                      pts[tris[t].v[2]])) {
          cavity.push_back(t);
          break;
        }
      }
    }
    require(!cavity.empty(), ErrorCode::DegenerateInput,
            "insertion point not locatable (degenerate configuration)");

    boundary.clear();
    for (int t : cavity) {
      const auto& v = tris[t].v;
      for (int e = 0; e < 3; ++e) {
        const int u0 = v[e], u1 = v[(e + 1) % 3];
        const auto key = std::minmax(u0, u1);
        auto it = boundary.find(key);
        if (it == boundary.end())
          boundary.emplace(key, std::make_pair(u0, u1));
        else
          it->second = {-1, -1};  // shared by two cavity triangles: interior
      }
    }
    for (int t : cavity) tris[t].alive = false;
    for (const auto& [key, oriented] : boundary) {
      if (oriented.first < 0) continue;
      tris.push_back({{p, oriented.first, oriented.second}, true});
    }
  }

  // Drop super-triangle fragments.
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (!t.alive) continue;
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    out.push_back({t.v[0], t.v[1], t.v[2]});
  }
  require(!out.empty(), ErrorCode::DegenerateInput, "no triangles produced");

  // Enforce CCW orientation.
  for (auto& t : out) {
    if (orient2d_det(points.coords[t[0]], points.coords[t[1]], points.coords[t[2]]) < 0)
      std::swap(t[1], t[2]);
  }

  // Canonicalization sweep: repair any residual in-circle violation and break
  // cocircular ties toward the diagonal with the smallest lowest endpoint.
  auto third = [](const std::array<int, 3>& t, int a, int b) {
    for (int v : t)
      if (v != a && v != b) return v;
    return -1;
  };
  bool changed = true;
  int sweeps = 0;
  while (changed && sweeps++ < 1000) {
    changed = false;
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (int t = 0; t < static_cast<int>(out.size()); ++t) {
      for (int e = 0; e < 3; ++e) {
        edge_tris[std::minmax(out[t][e], out[t][(e + 1) % 3])].push_back(t);
      }
    }
    std::vector<bool> dirty(out.size(), false);
    for (const auto& [edge, ts] : edge_tris) {
      if (ts.size() != 2) continue;
      const int ta = ts[0], tb = ts[1];
      if (dirty[ta] || dirty[tb]) continue;  // adjacency entry is stale
      const int a = edge.first, b = edge.second;
      const int c = third(out[ta], a, b), d = third(out[tb], a, b);
      if (c < 0 || d < 0 || c == d) continue;
      const Vec2 pa = points.coords[a], pb = points.coords[b];
      const Vec2 pc = points.coords[c], pd = points.coords[d];
      // Quad must be strictly convex for the flip to be valid.
      if (orient2d_sign(pc, pd, pa) * orient2d_sign(pc, pd, pb) >= 0) continue;
      // Test d against ta's circumcircle using ta's stored (CCW) vertex order.
      double det, scale;
      incircle_det(points.coords[out[ta][0]], points.coords[out[ta][1]],
                   points.coords[out[ta][2]], pd, &det, &scale);
      const bool violation = det > kInCircleTol * scale;
      const bool tie = std::abs(det) <= kInCircleTol * scale;
      if (violation || (tie && std::min(c, d) < std::min(a, b))) {
        out[ta] = {c, d, a};
        out[tb] = {c, d, b};
        for (auto* t : {&out[ta], &out[tb]}) {
          if (orient2d_det(points.coords[(*t)[0]], points.coords[(*t)[1]],
                           points.coords[(*t)[2]]) < 0)
            std::swap((*t)[1], (*t)[2]);
        }
        dirty[ta] = dirty[tb] = true;
        changed = true;
      }
    }
  }

  // Canonical form: rotate each triple so the smallest index leads (orientation
  // preserved), then sort the list.
  for (auto& t : out) {
    while (!(t[0] < t[1] && t[0] < t[2])) {
      const int tmp = t[0];
      t[0] = t[1];
      t[1] = t[2];
      t[2] = tmp;
    }
  }
  std::sort(out.begin(), out.end());

  std::vector<bool> seen(n, false);
  for (const auto& t : out)
    for (int v : t) seen[v] = true;
  for (int i = 0; i < n; ++i)
    require(seen[i], ErrorCode::DegenerateInput,
            "point " + std::to_string(i) + " absent from triangulation");

  Triangulation tri;
  tri.triangles = std::move(out);
  return tri;
}

// ---------------------------------------------------------------------------
// Neighbor graph in CSR form. Neighbor lists are sorted ascending and each
// directed edge carries the relative displacement x_j - x_i.
// ---------------------------------------------------------------------------

struct Graph {
  int n_nodes = 0;
  std::vector<int> offsets;      // size n_nodes + 1
  std::vector<int> neighbors;    // sorted within each node's range
  std::vector<double> edge_dx;   // aligned with neighbors
  std::vector<double> edge_dy;

  int degree(int i) const { return offsets[i + 1] - offsets[i]; }
  int n_directed_edges() const { return static_cast<int>(neighbors.size()); }

  Vec2 edge_feature(int i, int j) const {
    for (int k = offsets[i]; k < offsets[i + 1]; ++k) {
      if (neighbors[k] == j) return {edge_dx[k], edge_dy[k]};
    }
    raise(ErrorCode::InvalidArgument,
          "no edge " + std::to_string(i) + "->" + std::to_string(j));
  }

  bool has_edge(int i, int j) const {
    return std::binary_search(neighbors.begin() + offsets[i],
                              neighbors.begin() + offsets[i + 1], j);
  }
};

inline Graph build_graph(const Triangulation& tri, const PointSet& points) {
  const int n = points.size();
  std::vector<std::vector<int>> adj(n);
  for (const auto& t : tri.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      require(a >= 0 && a < n && b >= 0 && b < n, ErrorCode::ShapeMismatch,
              "triangle index out of range");
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  Graph g;
  g.n_nodes = n;
  g.offsets.resize(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    auto& v = adj[i];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    g.offsets[i + 1] = g.offsets[i] + static_cast<int>(v.size());
  }
  g.neighbors.reserve(g.offsets[n]);
  g.edge_dx.reserve(g.offsets[n]);
  g.edge_dy.reserve(g.offsets[n]);
  for (int i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      g.neighbors.push_back(j);
      g.edge_dx.push_back(points.coords[j].x - points.coords[i].x);
      g.edge_dy.push_back(points.coords[j].y - points.coords[i].y);
    }
  }
  return g;
}

/// Convenience: triangulate and build the neighbor graph in one call.
inline Graph build_graph(const PointSet& points) {
  return build_graph(delaunay(points), points);
}

inline bool graph_connected(const Graph& g) {
  if (g.n_nodes == 0) return true;
  std::vector<bool> vis(g.n_nodes, false);
  std::vector<int> stack{0};
  vis[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
      const int j = g.neighbors[k];
      if (!vis[j]) {
        vis[j] = true;
        ++count;
        stack.push_back(j);
      }
    }
  }
  return count == g.n_nodes;
}

}  // namespace graphpde::geo
