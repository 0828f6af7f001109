#pragma once

// Shared fixtures and independent brute-force oracles for the test suites.
// Everything here is deliberately written the slow, obvious way and stays
// independent of the library implementations it checks.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <unistd.h>

#include "ctsynth/mesh.hpp"
#include "ctsynth/rng.hpp"
#include "ctsynth/volume.hpp"

namespace testsup {

// ------------------------------------------------------------------ temp dirs

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("ctsynth_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ------------------------------------------------- independent point-in-mesh

// Moller-Trumbore along +z (the library uses +x first), written separately
// from the library's parity test.
inline int oracle_ray_hit(const ctsynth::Vec3& a, const ctsynth::Vec3& b,
                          const ctsynth::Vec3& c, const ctsynth::Vec3& p,
                          const ctsynth::Vec3& dir) {
  constexpr double kEps = 1e-12;
  const ctsynth::Vec3 e1 = b - a;
  const ctsynth::Vec3 e2 = c - a;
  const ctsynth::Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < kEps) return 0;
  const double inv = 1.0 / det;
  const ctsynth::Vec3 tv = p - a;
  const double u = tv.dot(pv) * inv;
  if (u < -kEps || u > 1.0 + kEps) return 0;
  const ctsynth::Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < -kEps || u + v > 1.0 + kEps) return 0;
  const double t = e2.dot(qv) * inv;
  if (t <= kEps) return 0;
  if (u < kEps || v < kEps || u + v > 1.0 - kEps) return -1;  // grazing
  return 1;
}

inline bool oracle_point_in_mesh(const ctsynth::TriMesh& mesh, const ctsynth::Vec3& p) {
  static const ctsynth::Vec3 dirs[4] = {
      {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0.311, 0.502, 0.807}};
  for (const auto& dir : dirs) {
    int crossings = 0;
    bool degenerate = false;
    for (const auto& f : mesh.faces) {
      const int r = oracle_ray_hit(mesh.vertices[f[0]], mesh.vertices[f[1]],
                                   mesh.vertices[f[2]], p, dir);
      if (r < 0) {
        degenerate = true;
        break;
      }
      crossings += r;
    }
    if (!degenerate) return (crossings & 1) != 0;
  }
  return false;
}

// Per-voxel brute force voxelization on the same grid as `like`.
inline ctsynth::Mask3 oracle_voxelize(const ctsynth::TriMesh& mesh,
                                      const ctsynth::Geometry& like) {
  ctsynth::Mask3 out{like, std::vector<std::uint8_t>(like.voxel_count(), 0)};
  for (int z = 0; z < like.dims[2]; ++z) {
    for (int y = 0; y < like.dims[1]; ++y) {
      for (int x = 0; x < like.dims[0]; ++x) {
        const ctsynth::Vec3 p{like.origin[0] + x * like.spacing[0],
                              like.origin[1] + y * like.spacing[1],
                              like.origin[2] + z * like.spacing[2]};
        out.at(x, y, z) = oracle_point_in_mesh(mesh, p) ? 1 : 0;
      }
    }
  }
  return out;
}

// -------------------------------------------------------- brute-force EDT

// Squared mm distance to the nearest background voxel center by full scan.
inline std::vector<double> oracle_distance_sq(const ctsynth::Mask3& mask) {
  const auto& d = mask.geo.dims;
  const auto& sp = mask.geo.spacing;
  std::vector<std::array<int, 3>> background;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!mask.at(x, y, z)) background.push_back({x, y, z});
      }
    }
  }
  std::vector<double> out(mask.geo.voxel_count(), 0.0);
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        double best = std::numeric_limits<double>::max();
        for (const auto& b : background) {
          const double dx = (x - b[0]) * sp[0];
          const double dy = (y - b[1]) * sp[1];
          const double dz = (z - b[2]) * sp[2];
          best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        out[mask.geo.index(x, y, z)] = best;
      }
    }
  }
  return out;
}

// ------------------------------------------------------ independent Pearson

// r from long-double accumulation; p by adaptive Simpson quadrature of the
// t density (a different route than the library's incomplete beta).
inline double oracle_pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  return static_cast<double>(sxy / sqrtl(sxx * syy));
}

namespace detail {

inline double t_pdf(double x, double nu) {
  const double lc = std::lgamma((nu + 1) / 2.0) - std::lgamma(nu / 2.0) -
                    0.5 * std::log(nu * 3.14159265358979323846);
  return std::exp(lc - (nu + 1) / 2.0 * std::log1p(x * x / nu));
}

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4 * fm + fb);
}

inline double adaptive_simpson(double a, double b, double fa, double fm, double fb,
                               double whole, double eps, double nu, int depth) {
  const double m = (a + b) / 2;
  const double lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = t_pdf(lm, nu), frm = t_pdf(rm, nu);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(a, m, fa, flm, fm, left, eps / 2, nu, depth - 1) +
         adaptive_simpson(m, b, fm, frm, fb, right, eps / 2, nu, depth - 1);
}

}  // namespace detail

inline double oracle_t_two_sided_p(double t, double nu) {
  const double a = 0.0, b = std::abs(t);
  if (b == 0.0) return 1.0;
  if (!std::isfinite(b)) return 0.0;
  const double fa = detail::t_pdf(a, nu);
  const double fm = detail::t_pdf((a + b) / 2, nu);
  const double fb = detail::t_pdf(b, nu);
  const double whole = detail::simpson(a, b, fa, fm, fb);
  const double integral =
      detail::adaptive_simpson(a, b, fa, fm, fb, whole, 1e-13, nu, 40);
  return std::max(0.0, 1.0 - 2.0 * integral);
}

// ------------------------------------------------------------- random masks

inline ctsynth::Mask3 random_mask(const ctsynth::Geometry& geo, double density,
                                  std::uint64_t seed) {
  ctsynth::SplitMix64 rng(seed);
  ctsynth::Mask3 m{geo, std::vector<std::uint8_t>(geo.voxel_count())};
  for (auto& v : m.values) v = rng.next_double() < density ? 1 : 0;
  return m;
}

// A random solid ellipsoid blob; connected and smooth-ish.
inline ctsynth::Mask3 random_blob(const ctsynth::Geometry& geo, std::uint64_t seed) {
  ctsynth::SplitMix64 rng(seed);
  const auto& d = geo.dims;
  const double cx = rng.uniform(d[0] * 0.3, d[0] * 0.7);
  const double cy = rng.uniform(d[1] * 0.3, d[1] * 0.7);
  const double cz = rng.uniform(d[2] * 0.3, d[2] * 0.7);
  const double rx = rng.uniform(d[0] * 0.1, d[0] * 0.3);
  const double ry = rng.uniform(d[1] * 0.1, d[1] * 0.3);
  const double rz = rng.uniform(d[2] * 0.1, d[2] * 0.3);
  ctsynth::Mask3 m{geo, std::vector<std::uint8_t>(geo.voxel_count(), 0)};
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const double q = std::pow((x - cx) / rx, 2) + std::pow((y - cy) / ry, 2) +
                         std::pow((z - cz) / rz, 2);
        if (q <= 1.0) m.at(x, y, z) = 1;
      }
    }
  }
  return m;
}

// ------------------------------------------------------------ CT phantom

struct Phantom {
  ctsynth::HuVolume volume;
  ctsynth::Mask3 lung;
};

// A simple chest-like phantom: air background, a soft-tissue body ellipse and
// two lung ellipsoids around -850 HU with deterministic texture.
inline Phantom make_phantom(const std::array<int, 3>& dims,
                            const std::array<double, 3>& spacing, std::uint64_t seed = 9) {
  ctsynth::Geometry geo;
  geo.dims = dims;
  geo.spacing = spacing;
  geo.origin = {3.1, -7.2, 11.9};

  ctsynth::HuVolume vol{geo, std::vector<std::int16_t>(geo.voxel_count(), -1000)};
  ctsynth::Mask3 lung{geo, std::vector<std::uint8_t>(geo.voxel_count(), 0)};

  const double cx = (dims[0] - 1) / 2.0;
  const double cy = (dims[1] - 1) / 2.0;
  const double cz = (dims[2] - 1) / 2.0;
  const double body_rx = dims[0] * 0.45, body_ry = dims[1] * 0.4;
  const double lung_rx = dims[0] * 0.17, lung_ry = dims[1] * 0.26, lung_rz = dims[2] * 0.42;
  const double lung_off = dims[0] * 0.21;

  ctsynth::SplitMix64 rng(seed);
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        const double bq = std::pow((x - cx) / body_rx, 2) + std::pow((y - cy) / body_ry, 2);
        if (bq > 1.0) continue;
        vol.at(x, y, z) = static_cast<std::int16_t>(40 + (rng.next_u64() % 21) - 10);
        for (int side = -1; side <= 1; side += 2) {
          const double lq = std::pow((x - cx - side * lung_off) / lung_rx, 2) +
                            std::pow((y - cy) / lung_ry, 2) + std::pow((z - cz) / lung_rz, 2);
          if (lq <= 1.0) {
            vol.at(x, y, z) = static_cast<std::int16_t>(-850 + (rng.next_u64() % 61) - 30);
            lung.at(x, y, z) = 1;
          }
        }
      }
    }
  }
  return {std::move(vol), std::move(lung)};
}

}  // namespace testsup
