#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "b3d/geometry.hpp"

namespace b3d {
namespace {

using Face = std::array<int, 3>;

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

int key_lo(std::uint64_t k) { return static_cast<int>(k >> 32); }
int key_hi(std::uint64_t k) { return static_cast<int>(k & 0xffffffffu); }

// Working representation: plain vectors, adjacency rebuilt every round.
struct Soup {
  std::vector<Vec3d> pos;
  std::vector<Face> faces;

  // One record per (face, corner); the edge runs from corner k to k+1.
  struct HalfEdge {
    std::uint64_t key;
    int face;
    int from;
    int to;
    int opposite;
  };

  std::vector<HalfEdge> half_edges() const {
    std::vector<HalfEdge> out;
    out.reserve(faces.size() * 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Face& t = faces[f];
      for (int k = 0; k < 3; ++k) {
        const int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
        out.push_back({edge_key(a, b), static_cast<int>(f), a, b, c});
      }
    }
    std::sort(out.begin(), out.end(), [](const HalfEdge& x, const HalfEdge& y) {
      return x.key != y.key ? x.key < y.key : x.face < y.face;
    });
    return out;
  }

  std::vector<std::vector<int>> rings() const {
    std::vector<std::vector<int>> r(pos.size());
    for (const Face& t : faces) {
      for (int k = 0; k < 3; ++k) {
        r[t[k]].push_back(t[(k + 1) % 3]);
        r[t[k]].push_back(t[(k + 2) % 3]);
      }
    }
    for (auto& ring : r) {
      std::sort(ring.begin(), ring.end());
      ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    }
    return r;
  }

  std::vector<char> boundary_flags() const {
    std::vector<char> flags(pos.size(), 0);
    const auto he = half_edges();
    for (std::size_t i = 0; i < he.size();) {
      std::size_t j = i;
      while (j < he.size() && he[j].key == he[i].key) ++j;
      if (j - i == 1) flags[he[i].from] = flags[he[i].to] = 1;
      i = j;
    }
    return flags;
  }

  Vec3d face_normal(const Face& t) const {
    return (pos[t[1]] - pos[t[0]]).cross(pos[t[2]] - pos[t[0]]);
  }
};

Soup to_soup(const Mesh& mesh) {
  Soup s;
  s.pos.resize(static_cast<std::size_t>(mesh.vertex_count()));
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) s.pos[i] = mesh.vertex(i);
  s.faces.resize(static_cast<std::size_t>(mesh.face_count()));
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    s.faces[f] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
  }
  return s;
}

Mesh from_soup(const Soup& s) {
  Mesh m;
  m.positions.resize(static_cast<Eigen::Index>(s.pos.size()), 3);
  for (std::size_t i = 0; i < s.pos.size(); ++i) m.positions.row(i) = s.pos[i];
  m.faces.resize(static_cast<Eigen::Index>(s.faces.size()), 3);
  for (std::size_t f = 0; f < s.faces.size(); ++f) {
    m.faces.row(f) << s.faces[f][0], s.faces[f][1], s.faces[f][2];
  }
  m = drop_unreferenced(m);
  return compute_vertex_normals(m);
}

Face rotated(const Face& t, int r) {
  return {t[r % 3], t[(r + 1) % 3], t[(r + 2) % 3]};
}

bool split_round(Soup& s, double max_len) {
  std::vector<std::uint64_t> keys;
  for (const Face& t : s.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if ((s.pos[a] - s.pos[b]).norm() > max_len) keys.push_back(edge_key(a, b));
    }
  }
  if (keys.empty()) return false;
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(keys.size() * 2);
  for (std::uint64_t k : keys) {
    mid.emplace(k, static_cast<int>(s.pos.size()));
    s.pos.push_back(0.5 * (s.pos[key_lo(k)] + s.pos[key_hi(k)]));
  }

  std::vector<Face> next;
  next.reserve(s.faces.size() * 2);
  for (const Face& t : s.faces) {
    std::array<int, 3> m{};
    int count = 0;
    for (int k = 0; k < 3; ++k) {
      auto it = mid.find(edge_key(t[k], t[(k + 1) % 3]));
      m[k] = it == mid.end() ? -1 : it->second;
      count += m[k] >= 0;
    }
    if (count == 0) {
      next.push_back(t);
    } else if (count == 1) {
      const int r = m[0] >= 0 ? 0 : (m[1] >= 0 ? 1 : 2);
      const Face v = rotated(t, r);
      const int m0 = m[r];
      next.push_back({v[0], m0, v[2]});
      next.push_back({m0, v[1], v[2]});
    } else if (count == 2) {
      const int unset = m[0] < 0 ? 0 : (m[1] < 0 ? 1 : 2);
      const int r = (unset + 1) % 3;
      const Face v = rotated(t, r);
      const int m0 = m[r], m1 = m[(r + 1) % 3];
      next.push_back({m0, v[1], m1});
      if ((s.pos[v[0]] - s.pos[m1]).norm() <= (s.pos[m0] - s.pos[v[2]]).norm()) {
        next.push_back({v[0], m0, m1});
        next.push_back({v[0], m1, v[2]});
      } else {
        next.push_back({v[0], m0, v[2]});
        next.push_back({m0, m1, v[2]});
      }
    } else {
      next.push_back({t[0], m[0], m[2]});
      next.push_back({t[1], m[1], m[0]});
      next.push_back({t[2], m[2], m[1]});
      next.push_back({m[0], m[1], m[2]});
    }
  }
  s.faces = std::move(next);
  return true;
}

int live_vertex_count(const Soup& s) {
  std::vector<char> used(s.pos.size(), 0);
  for (const Face& t : s.faces) used[t[0]] = used[t[1]] = used[t[2]] = 1;
  return static_cast<int>(std::count(used.begin(), used.end(), 1));
}

bool collapse_round(Soup& s, double low, double high) {
  const auto rings = s.rings();
  const auto boundary = s.boundary_flags();

  std::vector<std::vector<int>> incident(s.pos.size());
  for (std::size_t f = 0; f < s.faces.size(); ++f) {
    for (int v : s.faces[f]) incident[v].push_back(static_cast<int>(f));
  }

  struct Candidate {
    double len;
    std::uint64_t key;
  };
  std::vector<Candidate> cands;
  for (const Face& t : s.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (a > b) continue;  // each interior edge seen once from its a<b side
      const double len = (s.pos[a] - s.pos[b]).norm();
      if (len < low) cands.push_back({len, edge_key(a, b)});
    }
  }
  if (cands.empty()) return false;
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return x.len != y.len ? x.len < y.len : x.key < y.key;
  });

  int live = live_vertex_count(s);
  std::vector<char> locked(s.pos.size(), 0);
  std::vector<int> remap(s.pos.size());
  for (std::size_t i = 0; i < remap.size(); ++i) remap[i] = static_cast<int>(i);
  bool changed = false;

  for (const Candidate& c : cands) {
    if (live <= 4) break;
    const int a = key_lo(c.key), b = key_hi(c.key);
    if (locked[a] || locked[b] || boundary[a] || boundary[b]) continue;

    std::vector<int> common;
    std::set_intersection(rings[a].begin(), rings[a].end(), rings[b].begin(),
                          rings[b].end(), std::back_inserter(common));
    if (common.size() != 2) continue;  // link condition
    bool ok = true;
    for (int o : common) {
      if (locked[o] || rings[o].size() <= 3) ok = false;
    }
    if (!ok || rings[a].size() + rings[b].size() < 4 + 3) continue;

    const Vec3d p = 0.5 * (s.pos[a] + s.pos[b]);
    for (const auto* ring : {&rings[a], &rings[b]}) {
      for (int n : *ring) {
        if (n != a && n != b && (p - s.pos[n]).norm() > high) ok = false;
      }
    }
    if (!ok) continue;

    for (int v : {a, b}) {
      for (int f : incident[v]) {
        const Face& t = s.faces[f];
        const bool has_a = t[0] == a || t[1] == a || t[2] == a;
        const bool has_b = t[0] == b || t[1] == b || t[2] == b;
        if (has_a && has_b) continue;
        const Vec3d before = s.face_normal(t);
        Face moved = t;
        for (int& idx : moved) {
          if (idx == v) idx = -1;
        }
        const Vec3d& p0 = moved[0] < 0 ? p : s.pos[moved[0]];
        const Vec3d& p1 = moved[1] < 0 ? p : s.pos[moved[1]];
        const Vec3d& p2 = moved[2] < 0 ? p : s.pos[moved[2]];
        const Vec3d after = (p1 - p0).cross(p2 - p0);
        if (after.dot(before) <= 0.0 ||
            after.norm() < 1e-12 * before.norm()) {
          ok = false;
        }
      }
    }
    if (!ok) continue;

    s.pos[a] = p;
    remap[b] = a;
    locked[a] = locked[b] = 1;
    for (int n : rings[a]) locked[n] = 1;
    for (int n : rings[b]) locked[n] = 1;
    --live;
    changed = true;
  }
  if (!changed) return false;

  std::vector<Face> next;
  next.reserve(s.faces.size());
  for (Face t : s.faces) {
    for (int& v : t) v = remap[v];
    if (t[0] != t[1] && t[1] != t[2] && t[0] != t[2]) next.push_back(t);
  }
  s.faces = std::move(next);
  return true;
}

bool flip_round(Soup& s) {
  const auto he = s.half_edges();
  const auto rings = s.rings();
  const auto boundary = s.boundary_flags();
  std::vector<int> valence(s.pos.size());
  for (std::size_t i = 0; i < rings.size(); ++i) {
    valence[i] = static_cast<int>(rings[i].size());
  }
  std::vector<char> locked(s.pos.size(), 0);
  bool changed = false;

  for (std::size_t i = 0; i + 1 < he.size(); ++i) {
    if (he[i].key != he[i + 1].key) continue;
    if (i + 2 < he.size() && he[i + 2].key == he[i].key) continue;
    const auto& h1 = he[i].from < he[i].to ? he[i] : he[i + 1];
    const auto& h2 = he[i].from < he[i].to ? he[i + 1] : he[i];
    if (h1.from != h2.to || h1.to != h2.from) continue;  // orientation clash
    const int a = h1.from, b = h1.to, c = h1.opposite, d = h2.opposite;
    if (c == d) continue;
    if (locked[a] || locked[b] || locked[c] || locked[d]) continue;
    if (boundary[a] || boundary[b] || boundary[c] || boundary[d]) continue;
    if (valence[a] <= 3 || valence[b] <= 3) continue;
    if (std::binary_search(rings[c].begin(), rings[c].end(), d)) continue;

    const int before = std::abs(valence[a] - 6) + std::abs(valence[b] - 6) +
                       std::abs(valence[c] - 6) + std::abs(valence[d] - 6);
    const int after = std::abs(valence[a] - 7) + std::abs(valence[b] - 7) +
                      std::abs(valence[c] - 5) + std::abs(valence[d] - 5);
    if (after >= before) continue;

    const Face f1 = {a, d, c};
    const Face f2 = {d, b, c};
    const Vec3d old_n =
        s.face_normal(s.faces[h1.face]) + s.face_normal(s.faces[h2.face]);
    const Vec3d n1 = s.face_normal(f1), n2 = s.face_normal(f2);
    if (n1.dot(old_n) <= 0.0 || n2.dot(old_n) <= 0.0 || n1.dot(n2) <= 0.0) {
      continue;
    }

    s.faces[h1.face] = f1;
    s.faces[h2.face] = f2;
    --valence[a];
    --valence[b];
    ++valence[c];
    ++valence[d];
    locked[a] = locked[b] = locked[c] = locked[d] = 1;
    changed = true;
  }
  return changed;
}

void tangential_relax(Soup& s) {
  const auto rings = s.rings();
  const auto boundary = s.boundary_flags();
  std::vector<Vec3d> normal(s.pos.size(), Vec3d::Zero());
  for (const Face& t : s.faces) {
    const Vec3d n = s.face_normal(t);
    for (int v : t) normal[v] += n;
  }
  std::vector<Vec3d> next = s.pos;
  const auto count = static_cast<std::ptrdiff_t>(s.pos.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto& ring = rings[i];
    if (ring.empty() || boundary[i]) continue;
    Vec3d centroid = Vec3d::Zero();
    for (int j : ring) centroid += s.pos[j];
    centroid /= static_cast<double>(ring.size());
    const double len = normal[i].norm();
    if (len <= 0.0) continue;
    const Vec3d n = normal[i] / len;
    const Vec3d delta = centroid - s.pos[i];
    next[i] = s.pos[i] + delta - n.dot(delta) * n;
  }
  s.pos = std::move(next);
}

}  // namespace

Mesh split_long_edges(const Mesh& mesh, double max_edge_length) {
  require(max_edge_length > 0.0, ErrorKind::kInvalidArgument,
          "maximum edge length must be positive");
  validate(mesh);
  Soup s = to_soup(mesh);
  for (int round = 0; round < 32 && split_round(s, max_edge_length); ++round) {
  }
  return from_soup(s);
}

Mesh remesh(const Mesh& mesh, double target_edge_length,
            const RemeshOptions& options) {
  require(target_edge_length > 0.0, ErrorKind::kInvalidArgument,
          "target edge length must be positive");
  validate(mesh);
  require(mesh.face_count() > 0, ErrorKind::kPrecondition,
          "cannot remesh a mesh without faces");
  require(is_edge_manifold(mesh), ErrorKind::kMalformed,
          "remesh requires an edge-manifold, consistently oriented mesh");

  const double high = 4.0 / 3.0 * target_edge_length;
  const double low = 4.0 / 5.0 * target_edge_length;
  Soup s = to_soup(mesh);
  for (int it = 0; it < options.iterations; ++it) {
    for (int round = 0; round < 32 && split_round(s, high); ++round) {
    }
    for (int round = 0; round < 64 && collapse_round(s, low, high); ++round) {
    }
    for (int round = 0; round < 3 && flip_round(s); ++round) {
    }
    tangential_relax(s);
  }
  return from_soup(s);
}

}  // namespace b3d
