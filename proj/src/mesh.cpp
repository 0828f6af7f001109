#include "ctsynth/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "ctsynth/rng.hpp"

namespace ctsynth {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

// --- Icosphere ----------------------------------------------------------------

namespace {

TriMesh make_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  m.faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  return m;
}

}  // namespace

TriMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 6) {
    throw ParamError("make_icosphere: subdivisions must be in [0, 6]");
  }
  if (radius <= 0) throw ParamError("make_icosphere: radius must be positive");

  TriMesh m = make_icosahedron();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 p = (m.vertices[a] + m.vertices[b]) * 0.5;
      m.vertices.push_back(p);
      const int idx = static_cast<int>(m.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) {
    v = v * (radius / v.norm());
  }
  return m;
}

// --- Topology -------------------------------------------------------------------

bool is_closed_manifold(const TriMesh& mesh) {
  std::set<std::pair<int, int>> directed;
  for (const auto& f : mesh.faces) {
    if (f[0] == f[1] || f[1] == f[2] || f[2] == f[0]) return false;
    for (int e = 0; e < 3; ++e) {
      const auto edge = std::make_pair(f[e], f[(e + 1) % 3]);
      if (!directed.insert(edge).second) return false;  // duplicated directed edge
    }
  }
  // With consistent winding, closure means every directed edge has its reverse.
  for (const auto& e : directed) {
    if (!directed.count({e.second, e.first})) return false;
  }
  for (const auto& v : mesh.vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) return false;
  }
  return true;
}

Vec3 mesh_centroid(const TriMesh& mesh) {
  Vec3 c;
  for (const auto& v : mesh.vertices) c += v;
  return c / static_cast<double>(mesh.vertices.size());
}

double mesh_volume(const TriMesh& mesh) {
  double v6 = 0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    v6 += a.dot(b.cross(c));
  }
  return v6 / 6.0;
}

double mesh_surface_area(const TriMesh& mesh) {
  double s = 0;
  for (const auto& f : mesh.faces) {
    const Vec3 ab = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 ac = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    s += ab.cross(ac).norm() / 2.0;
  }
  return s;
}

namespace {

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::set<int>> adj(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      adj[f[e]].insert(f[(e + 1) % 3]);
      adj[f[e]].insert(f[(e + 2) % 3]);
    }
  }
  std::vector<std::vector<int>> out(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

}  // namespace

double mesh_roughness(const TriMesh& mesh) {
  const auto adj = vertex_adjacency(mesh);
  double total = 0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (adj[i].empty()) continue;
    Vec3 avg;
    for (int j : adj[i]) avg += mesh.vertices[j];
    avg = avg / static_cast<double>(adj[i].size());
    total += (avg - mesh.vertices[i]).norm();
  }
  return total;
}

// --- Deformation -----------------------------------------------------------------

TriMesh deform(const TriMesh& mesh, const LesionShapeParams& params) {
  if (params.n_points < 0 ||
      static_cast<std::size_t>(params.n_points) > mesh.vertices.size()) {
    throw ParamError("deform: n_points exceeds vertex count");
  }
  if (params.lambda_range[0] > params.lambda_range[1]) {
    throw ParamError("deform: lambda_range low > high");
  }
  if (params.delta <= 0) throw ParamError("deform: delta must be positive");

  TriMesh out = mesh;
  const Vec3 centroid = mesh_centroid(mesh);
  SplitMix64 rng(params.rng_seed);
  const auto selected = rng.sample_distinct(
      static_cast<std::uint32_t>(mesh.vertices.size()),
      static_cast<std::uint32_t>(params.n_points));

  for (const auto vi : selected) {
    const double lambda = rng.uniform(params.lambda_range[0], params.lambda_range[1]);
    const Vec3 anchor = out.vertices[vi];  // current position of the selected vertex
    for (auto& n : out.vertices) {
      const double dist = (anchor - n).norm();
      if (dist >= params.delta) continue;
      const double alpha = affine_factor(params.delta, dist, lambda);
      n = centroid + (n - centroid) * alpha;
    }
  }
  return out;
}

// --- HC-Laplacian smoothing ---------------------------------------------------------

TriMesh smooth_hc(const TriMesh& mesh, int iterations) {
  if (iterations <= 0) return mesh;
  constexpr double kAlpha = 0.0;
  constexpr double kBeta = 0.5;

  const auto adj = vertex_adjacency(mesh);
  const std::vector<Vec3>& original = mesh.vertices;
  std::vector<Vec3> p = mesh.vertices;
  std::vector<Vec3> q(p.size());
  std::vector<Vec3> b(p.size());

  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (adj[i].empty()) {
        q[i] = p[i];
        b[i] = Vec3{};
        continue;
      }
      Vec3 avg;
      for (int j : adj[i]) avg += p[j];
      q[i] = avg / static_cast<double>(adj[i].size());
      // Difference to the blend of original and previous positions.
      b[i] = q[i] - (original[i] * kAlpha + p[i] * (1.0 - kAlpha));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (adj[i].empty()) continue;
      Vec3 nb;
      for (int j : adj[i]) nb += b[j];
      p[i] = q[i] - (b[i] * kBeta + nb * ((1.0 - kBeta) / adj[i].size()));
    }
  }

  TriMesh out = mesh;
  out.vertices = std::move(p);
  return out;
}

// --- Point containment ---------------------------------------------------------------

namespace {

// Counts crossings of the ray p + t*dir (t > 0) against one triangle.
// Returns -1 when the intersection is degenerate (on edge/vertex or ray in
// plane), 0 for a miss, 1 for a clean crossing.
int ray_crossing(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p, const Vec3& dir) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  const double scale = std::max({std::abs(e1.x), std::abs(e1.y), std::abs(e1.z),
                                 std::abs(e2.x), std::abs(e2.y), std::abs(e2.z), 1.0});
  if (std::abs(det) < kEps * scale) return 0;  // parallel: adjacent faces pick it up
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = s.dot(h) * inv;
  if (u < -kEps || u > 1 + kEps) return 0;
  const Vec3 qv = s.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < -kEps || u + v > 1 + kEps) return 0;
  const double t = e2.dot(qv) * inv;
  if (t <= kEps) return 0;
  if (u < kEps || v < kEps || u + v > 1 - kEps) return -1;  // grazing an edge/vertex
  return 1;
}

const Vec3 kRayDirs[4] = {
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.572, 0.693, 0.439}};

}  // namespace

bool point_in_mesh(const TriMesh& mesh, const Vec3& p) {
  // Retry with a different direction whenever a ray grazes an edge or vertex.
  for (const Vec3& dir : kRayDirs) {
    int crossings = 0;
    bool degenerate = false;
    for (const auto& f : mesh.faces) {
      const int r = ray_crossing(mesh.vertices[f[0]], mesh.vertices[f[1]],
                                 mesh.vertices[f[2]], p, dir);
      if (r < 0) {
        degenerate = true;
        break;
      }
      crossings += r;
    }
    if (!degenerate) return (crossings & 1) != 0;
  }
  // All probe directions grazed; the point is effectively on the surface.
  return false;
}

// --- Voxelization -----------------------------------------------------------------------

namespace {

// Akenine-Moller triangle/AABB separating axis test. Box given by center and
// half-extent.
bool tri_box_overlap(const Vec3& center, const Vec3& half, const Vec3& ta, const Vec3& tb,
                     const Vec3& tc) {
  const Vec3 v0 = ta - center;
  const Vec3 v1 = tb - center;
  const Vec3 v2 = tc - center;
  const Vec3 e0 = v1 - v0;
  const Vec3 e1 = v2 - v1;
  const Vec3 e2 = v0 - v2;

  auto axis_test = [&](const Vec3& axis) {
    const double p0 = v0.dot(axis);
    const double p1 = v1.dot(axis);
    const double p2 = v2.dot(axis);
    const double r = half.x * std::abs(axis.x) + half.y * std::abs(axis.y) +
                     half.z * std::abs(axis.z);
    const double mn = std::min({p0, p1, p2});
    const double mx = std::max({p0, p1, p2});
    return !(mn > r || mx < -r);
  };

  // 9 cross-product axes.
  for (const Vec3& e : {e0, e1, e2}) {
    if (!axis_test({0, -e.z, e.y})) return false;
    if (!axis_test({e.z, 0, -e.x})) return false;
    if (!axis_test({-e.y, e.x, 0})) return false;
  }
  // Box face normals.
  auto minmax3 = [](double a, double b, double c) {
    return std::pair<double, double>{std::min({a, b, c}), std::max({a, b, c})};
  };
  const auto [xmin, xmax] = minmax3(v0.x, v1.x, v2.x);
  if (xmin > half.x || xmax < -half.x) return false;
  const auto [ymin, ymax] = minmax3(v0.y, v1.y, v2.y);
  if (ymin > half.y || ymax < -half.y) return false;
  const auto [zmin, zmax] = minmax3(v0.z, v1.z, v2.z);
  if (zmin > half.z || zmax < -half.z) return false;
  // Triangle plane.
  const Vec3 n = e0.cross(e1);
  const double d = -n.dot(v0);
  const double r = half.x * std::abs(n.x) + half.y * std::abs(n.y) + half.z * std::abs(n.z);
  return std::abs(d) <= r;
}

struct VoxelizeCtx {
  const TriMesh& mesh;
  Mask3& mask;
};

Vec3 voxel_center(const Geometry& g, int x, int y, int z) {
  return {g.origin[0] + x * g.spacing[0], g.origin[1] + y * g.spacing[1],
          g.origin[2] + z * g.spacing[2]};
}

void fill_box(Mask3& mask, const std::array<int, 3>& lo, const std::array<int, 3>& hi,
              std::uint8_t value) {
  for (int z = lo[2]; z < hi[2]; ++z) {
    for (int y = lo[1]; y < hi[1]; ++y) {
      for (int x = lo[0]; x < hi[0]; ++x) {
        mask.at(x, y, z) = value;
      }
    }
  }
}

// Recursively classify the index box [lo, hi). `candidates` holds the indices
// of triangles that may intersect the box's center AABB.
void voxelize_rec(VoxelizeCtx& ctx, const std::array<int, 3>& lo, const std::array<int, 3>& hi,
                  const std::vector<int>& candidates) {
  const Geometry& g = ctx.mask.geo;
  const Vec3 wlo = voxel_center(g, lo[0], lo[1], lo[2]);
  const Vec3 whi = voxel_center(g, hi[0] - 1, hi[1] - 1, hi[2] - 1);
  const Vec3 center = (wlo + whi) * 0.5;
  // Inflate slightly so borderline triangles subdivide rather than vanish.
  const Vec3 half = (whi - wlo) * 0.5 + Vec3{1e-9, 1e-9, 1e-9};

  std::vector<int> inside;
  inside.reserve(candidates.size());
  for (int t : candidates) {
    const auto& f = ctx.mesh.faces[t];
    if (tri_box_overlap(center, half, ctx.mesh.vertices[f[0]], ctx.mesh.vertices[f[1]],
                        ctx.mesh.vertices[f[2]])) {
      inside.push_back(t);
    }
  }

  if (inside.empty()) {
    // Surface-free region: one parity test decides the whole box.
    if (point_in_mesh(ctx.mesh, wlo)) fill_box(ctx.mask, lo, hi, 1);
    return;
  }

  const int nx = hi[0] - lo[0], ny = hi[1] - lo[1], nz = hi[2] - lo[2];
  if (nx == 1 && ny == 1 && nz == 1) {
    ctx.mask.at(lo[0], lo[1], lo[2]) = point_in_mesh(ctx.mesh, wlo) ? 1 : 0;
    return;
  }

  const std::array<int, 3> mid{nx > 1 ? lo[0] + nx / 2 : hi[0],
                               ny > 1 ? lo[1] + ny / 2 : hi[1],
                               nz > 1 ? lo[2] + nz / 2 : hi[2]};
  const std::array<std::array<int, 2>, 3> seg{{{lo[0], mid[0]}, {lo[1], mid[1]}, {lo[2], mid[2]}}};
  const std::array<std::array<int, 2>, 3> seg2{{{mid[0], hi[0]}, {mid[1], hi[1]}, {mid[2], hi[2]}}};
  for (int oz = 0; oz < 2; ++oz) {
    for (int oy = 0; oy < 2; ++oy) {
      for (int ox = 0; ox < 2; ++ox) {
        const std::array<int, 3> slo{ox ? seg2[0][0] : seg[0][0], oy ? seg2[1][0] : seg[1][0],
                                     oz ? seg2[2][0] : seg[2][0]};
        const std::array<int, 3> shi{ox ? seg2[0][1] : seg[0][1], oy ? seg2[1][1] : seg[1][1],
                                     oz ? seg2[2][1] : seg[2][1]};
        if (slo[0] >= shi[0] || slo[1] >= shi[1] || slo[2] >= shi[2]) continue;
        voxelize_rec(ctx, slo, shi, inside);
      }
    }
  }
}

}  // namespace

Mask3 voxelize(const TriMesh& mesh, const std::array<double, 3>& spacing, double padding) {
  if (!is_closed_manifold(mesh)) throw ParamError("voxelize: mesh must be closed 2-manifold");
  for (double s : spacing) {
    if (s <= 0) throw ParamError("voxelize: spacing must be positive");
  }
  if (padding < 0) throw ParamError("voxelize: padding must be non-negative");

  Vec3 bbmin = mesh.vertices[0], bbmax = mesh.vertices[0];
  for (const auto& v : mesh.vertices) {
    bbmin = {std::min(bbmin.x, v.x), std::min(bbmin.y, v.y), std::min(bbmin.z, v.z)};
    bbmax = {std::max(bbmax.x, v.x), std::max(bbmax.y, v.y), std::max(bbmax.z, v.z)};
  }

  Geometry geo;
  const Vec3 lo = bbmin - Vec3{padding, padding, padding};
  const Vec3 hi = bbmax + Vec3{padding, padding, padding};
  const double ext[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
  for (int a = 0; a < 3; ++a) {
    geo.dims[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / spacing[a])));
    geo.spacing[a] = spacing[a];
  }
  geo.origin = {lo.x + spacing[0] / 2, lo.y + spacing[1] / 2, lo.z + spacing[2] / 2};

  Mask3 mask = make_mask(geo);
  VoxelizeCtx ctx{mesh, mask};
  std::vector<int> all(mesh.faces.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  voxelize_rec(ctx, {0, 0, 0}, geo.dims, all);
  return mask;
}

// --- Transforms ----------------------------------------------------------------------

TriMesh scale_mesh(const TriMesh& mesh, double factor) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = v * factor;
  return out;
}

TriMesh translate_mesh(const TriMesh& mesh, const Vec3& offset) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v += offset;
  return out;
}

TriMesh rotate_mesh_z90(const TriMesh& mesh, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  TriMesh out = mesh;
  for (auto& v : out.vertices) {
    Vec3 p = v;
    for (int i = 0; i < k; ++i) p = {-p.y, p.x, p.z};
    v = p;
  }
  return out;
}

// --- STL dump ------------------------------------------------------------------------

void write_stl_ascii(const TriMesh& mesh, const std::string& path, const std::string& name) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write STL: " + path);
  out << "solid " << name << "\n";
  char buf[256];
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len > 0) n = n / len;
    std::snprintf(buf, sizeof(buf), "  facet normal %g %g %g\n", n.x, n.y, n.z);
    out << buf << "    outer loop\n";
    for (int vi : f) {
      const Vec3& v = mesh.vertices[vi];
      std::snprintf(buf, sizeof(buf), "      vertex %g %g %g\n", v.x, v.y, v.z);
      out << buf;
    }
    out << "    endloop\n  endfacet\n";
  }
  out << "endsolid " << name << "\n";
  if (!out) throw IoError("failed writing STL: " + path);
}

// --- Shape synthesis --------------------------------------------------------------------

TriMesh synthesize_lesion_mesh(const LesionShapeParams& params) {
  if (params.base_radius <= 0) throw ParamError("synthesize_lesion_mesh: base_radius must be positive");
  // Deform on the unit-radius template (delta is expressed relative to it),
  // then scale to the requested physical size.
  TriMesh m = make_icosphere(params.sphere_subdivisions, 1.0);
  m = deform(m, params);
  m = smooth_hc(m, params.smoothing_iters);
  m = scale_mesh(m, params.base_radius);
  if (params.random_rot90) {
    SplitMix64 rot_rng(derive_seed(params.rng_seed, 0x5157ULL));
    m = rotate_mesh_z90(m, static_cast<int>(rot_rng.next_index(4)));
  }
  return m;
}

}  // namespace ctsynth
