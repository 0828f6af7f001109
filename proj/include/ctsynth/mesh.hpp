#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctsynth/error.hpp"
#include "ctsynth/volume.hpp"

namespace ctsynth {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
};

// Closed triangle mesh in millimeter space. Faces are counterclockwise when
// viewed from outside (outward orientation); every edge is shared by exactly
// two faces.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

struct LesionShapeParams {
  int n_points = 10;                         // N: deformed surface points
  std::array<double, 2> lambda_range{1.5, 1.5};  // amplitude factor bounds
  double delta = 0.6;                        // neighborhood distance threshold
  double base_radius = 8.0;                  // final shape scale, mm
  int sphere_subdivisions = 3;
  int smoothing_iters = 2;
  bool random_rot90 = false;                 // optional axis-aligned z-rotations
  std::uint64_t rng_seed = 0;
};

// Icosahedron subdivided `subdivisions` times (0..6), vertices projected to
// `radius`. Closed 2-manifold by construction.
TriMesh make_icosphere(int subdivisions, double radius);

// The per-neighbor scale factor of the surface deformation:
// alpha = 1 + ((delta - dist) * lambda).
inline double affine_factor(double delta, double dist, double lambda) {
  return 1.0 + ((delta - dist) * lambda);
}

// Randomly selects params.n_points vertices; each pushes its neighborhood
// (vertices closer than delta, itself included) radially away from the mesh
// centroid by affine_factor. Influences are applied sequentially in selection
// order, so overlapping neighborhoods compose multiplicatively. Topology is
// unchanged.
TriMesh deform(const TriMesh& mesh, const LesionShapeParams& params);

// HC-Laplacian smoothing (Laplacian step followed by the Humphrey push-back)
// with fixed coefficients alpha = 0.0, beta = 0.5.
TriMesh smooth_hc(const TriMesh& mesh, int iterations);

// Rasterizes a closed mesh onto a voxel grid covering its bounding box plus
// `padding` mm. A voxel is foreground iff its center is inside the mesh;
// resolved by recursive octree subdivision with ray-parity tests at the leaves.
Mask3 voxelize(const TriMesh& mesh, const std::array<double, 3>& spacing, double padding);

// Ray-parity point containment test.
bool point_in_mesh(const TriMesh& mesh, const Vec3& p);

// Closed-manifold check: every directed edge appears exactly once and every
// undirected edge exactly twice; no degenerate faces.
bool is_closed_manifold(const TriMesh& mesh);

// Signed volume via the divergence theorem (positive for outward orientation).
double mesh_volume(const TriMesh& mesh);
double mesh_surface_area(const TriMesh& mesh);

Vec3 mesh_centroid(const TriMesh& mesh);

// Sum over vertices of |umbrella Laplacian|; a roughness proxy used to track
// smoothing progress.
double mesh_roughness(const TriMesh& mesh);

TriMesh scale_mesh(const TriMesh& mesh, double factor);
TriMesh translate_mesh(const TriMesh& mesh, const Vec3& offset);
TriMesh rotate_mesh_z90(const TriMesh& mesh, int quarter_turns);

// Debug dump as ASCII STL; facet normals recomputed from winding.
void write_stl_ascii(const TriMesh& mesh, const std::string& path,
                     const std::string& name = "lesion");

// One random lesion shape: unit icosphere -> deform -> smooth -> scale to
// base_radius (optionally rotated by a random multiple of 90 degrees about z).
TriMesh synthesize_lesion_mesh(const LesionShapeParams& params);

}  // namespace ctsynth
