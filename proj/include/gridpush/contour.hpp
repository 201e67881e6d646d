#pragma once

// Exposed cell faces and their order along the outer boundary of a grid body.

#include "gridpush/body_model.hpp"

#include <map>
#include <vector>

namespace gridpush {

// Faces are numbered 0: +x, 1: +y, 2: -x, 3: -y in the body frame.
struct BoundaryFace {
  Index cell = 0;
  int face = 0;
  bool operator==(const BoundaryFace&) const = default;
};

inline Vec2 face_normal(int face) {
  switch (face) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

inline GridCoord face_neighbor(GridCoord c, int face) {
  switch (face) {
    case 0: return {c.row + 1, c.col};
    case 1: return {c.row, c.col + 1};
    case 2: return {c.row - 1, c.col};
    default: return {c.row, c.col - 1};
  }
}

// Every face whose neighbor cell is empty, holes included.
inline std::vector<BoundaryFace> exposed_faces(const GridBody& body) {
  std::vector<BoundaryFace> out;
  for (Index i = 0; i < body.size(); ++i)
    for (int f = 0; f < 4; ++f)
      if (!body.index_of(face_neighbor(body.cells()[i], f))) out.push_back({i, f});
  return out;
}

// The faces a pusher can reach, in counter-clockwise order along the outer
// boundary. Faces lining interior holes are excluded. Where the boundary
// pinches at a shared corner it is split into several loops; they are
// concatenated and each is cyclic on its own.
struct Contour {
  std::vector<BoundaryFace> faces;
  std::vector<std::size_t> loop_start;  // first face of each loop
  std::vector<std::size_t> loop_of;     // loop index of each face

  std::size_t size() const { return faces.size(); }

  std::size_t left(std::size_t k) const {
    const std::size_t l = loop_of[k];
    const std::size_t b = loop_start[l], e = l + 1 < loop_start.size() ? loop_start[l + 1] : faces.size();
    return k + 1 < e ? k + 1 : b;
  }
  std::size_t right(std::size_t k) const {
    const std::size_t l = loop_of[k];
    const std::size_t b = loop_start[l], e = l + 1 < loop_start.size() ? loop_start[l + 1] : faces.size();
    return k > b ? k - 1 : e - 1;
  }
  std::optional<std::size_t> find(const BoundaryFace& f) const {
    for (std::size_t k = 0; k < faces.size(); ++k)
      if (faces[k] == f) return k;
    return std::nullopt;
  }
};

inline Contour outer_contour(const GridBody& body) {
  // Directed boundary edges on the doubled integer lattice, interior on the left.
  using Pt = std::pair<int, int>;
  struct Edge {
    Pt from, to;
    BoundaryFace face;
  };
  std::vector<Edge> edges;
  for (const auto& f : exposed_faces(body)) {
    const GridCoord c = body.cells()[f.cell];
    const int x = 2 * c.row, y = 2 * c.col;
    switch (f.face) {
      case 0: edges.push_back({{x + 1, y - 1}, {x + 1, y + 1}, f}); break;
      case 1: edges.push_back({{x + 1, y + 1}, {x - 1, y + 1}, f}); break;
      case 2: edges.push_back({{x - 1, y + 1}, {x - 1, y - 1}, f}); break;
      default: edges.push_back({{x - 1, y - 1}, {x + 1, y - 1}, f}); break;
    }
  }
  std::multimap<Pt, std::size_t> outgoing;
  for (std::size_t k = 0; k < edges.size(); ++k) outgoing.emplace(edges[k].from, k);

  auto turn = [](const Edge& a, const Edge& b) {
    const int ax = a.to.first - a.from.first, ay = a.to.second - a.from.second;
    const int bx = b.to.first - b.from.first, by = b.to.second - b.from.second;
    return ax * by - ay * bx;  // > 0 for a left turn
  };

  std::vector<bool> used(edges.size(), false);
  Contour out;
  for (std::size_t s = 0; s < edges.size(); ++s) {
    if (used[s]) continue;
    std::vector<std::size_t> loop;
    long twice_area = 0;
    std::size_t k = s;
    while (!used[k]) {
      used[k] = true;
      loop.push_back(k);
      twice_area += static_cast<long>(edges[k].from.first) * edges[k].to.second -
                    static_cast<long>(edges[k].to.first) * edges[k].from.second;
      // At a pinch vertex keep hugging the same cell: prefer the left turn.
      auto [lo, hi] = outgoing.equal_range(edges[k].to);
      std::size_t next = edges.size();
      int best = -2;
      for (auto it = lo; it != hi; ++it) {
        if (used[it->second] && it->second != s) continue;
        const int t = turn(edges[k], edges[it->second]);
        const int rank = t > 0 ? 1 : (t == 0 ? 0 : -1);
        if (rank > best) {
          best = rank;
          next = it->second;
        }
      }
      if (next == edges.size()) break;
      k = next;
    }
    if (twice_area <= 0) continue;  // hole
    // Start each loop at its lowest (cell, face) for a stable order.
    const auto first = std::min_element(loop.begin(), loop.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(edges[a].face.cell, edges[a].face.face) < std::tie(edges[b].face.cell, edges[b].face.face);
    });
    std::rotate(loop.begin(), first, loop.end());
    out.loop_start.push_back(out.faces.size());
    for (std::size_t e : loop) {
      out.faces.push_back(edges[e].face);
      out.loop_of.push_back(out.loop_start.size() - 1);
    }
  }
  return out;
}

// Cells with at least one face on the outer boundary, ascending.
inline std::vector<Index> outer_cells(const GridBody& body) {
  std::vector<Index> out;
  for (const auto& f : outer_contour(body).faces) out.push_back(f.cell);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace gridpush
