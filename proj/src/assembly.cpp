#include "ctsynth/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctsynth {

Mask3 place_component(const Mask3& canvas, const Mask3& component,
                      const std::array<int, 3>& center) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(canvas.geo.spacing[a] - component.geo.spacing[a]) > 1e-6) {
      throw GeometryError("place_component: spacing mismatch; resample_mask first");
    }
  }
  Mask3 out = canvas;
  if (component.empty_mask()) return out;

  const auto c = mask_centroid(component);
  std::array<int, 3> shift;
  for (int a = 0; a < 3; ++a) {
    shift[a] = static_cast<int>(std::lround(center[a] - c[a]));
  }
  const auto& d = component.geo.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!component.at(x, y, z)) continue;
        const int tx = x + shift[0], ty = y + shift[1], tz = z + shift[2];
        if (out.geo.contains(tx, ty, tz)) out.at(tx, ty, tz) = 1;
      }
    }
  }
  return out;
}

Mask3 union_masks(const std::vector<Mask3>& masks) {
  if (masks.empty()) throw ParamError("union_masks: empty input list");
  Mask3 out = masks.front();
  for (std::size_t i = 1; i < masks.size(); ++i) {
    if (!masks[i].geo.same_grid(out.geo)) {
      throw GeometryError("union_masks: geometry mismatch");
    }
    for (std::size_t v = 0; v < out.values.size(); ++v) {
      out.values[v] = (out.values[v] || masks[i].values[v]) ? 1 : 0;
    }
  }
  return out;
}

Mask3 crop_to_lung(const Mask3& mask, const Mask3& lung) {
  if (!mask.geo.same_grid(lung.geo)) throw GeometryError("crop_to_lung: geometry mismatch");
  Mask3 out = mask;
  for (std::size_t v = 0; v < out.values.size(); ++v) {
    out.values[v] = (out.values[v] && lung.values[v]) ? 1 : 0;
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D lower envelope of parabolas (x - pos[q])^2 + f[q] sampled at pos[i]
// (Felzenszwalb & Huttenlocher, generalized to non-unit sample positions).
// Parabolas with infinite offset are never inserted into the envelope.
void edt_1d(int n, const std::vector<double>& f, const std::vector<double>& pos,
            std::vector<double>& out, std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto vertex = [&](int p, int q) {
    // Intersection abscissa of parabolas rooted at pos[p] and pos[q].
    return (f[p] - f[q] + pos[p] * pos[p] - pos[q] * pos[q]) / (2 * (pos[p] - pos[q]));
  };
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k == 0 && f[v[0]] == kInf) {
      v[0] = q;
      continue;
    }
    double s = vertex(q, v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = vertex(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (f[v[0]] == kInf) {
    // Whole line has no source yet.
    std::fill(out.begin(), out.begin() + n, kInf);
    return;
  }
  int k2 = 0;
  for (int i = 0; i < n; ++i) {
    while (z[k2 + 1] < pos[i]) ++k2;
    const double d = pos[i] - pos[v[k2]];
    out[i] = d * d + f[v[k2]];
  }
}

}  // namespace

std::vector<double> distance_to_background_sq(const Mask3& mask) {
  const auto& dims = mask.geo.dims;
  const auto& sp = mask.geo.spacing;
  const std::size_t n = mask.geo.voxel_count();

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = mask.values[i] ? kInf : 0.0;

  const int maxdim = std::max({dims[0], dims[1], dims[2]});
  std::vector<double> f(maxdim), out(maxdim), pos(maxdim), z(maxdim + 1);
  std::vector<int> v(maxdim);

  // Pass along x.
  for (int a = 0; a < dims[0]; ++a) pos[a] = a * sp[0];
  for (int zc = 0; zc < dims[2]; ++zc) {
    for (int y = 0; y < dims[1]; ++y) {
      const std::size_t base = mask.geo.index(0, y, zc);
      for (int x = 0; x < dims[0]; ++x) f[x] = dist[base + x];
      edt_1d(dims[0], f, pos, out, v, z);
      for (int x = 0; x < dims[0]; ++x) dist[base + x] = out[x];
    }
  }

  // Pass along y.
  for (int a = 0; a < dims[1]; ++a) pos[a] = a * sp[1];
  for (int zc = 0; zc < dims[2]; ++zc) {
    for (int x = 0; x < dims[0]; ++x) {
      for (int y = 0; y < dims[1]; ++y) f[y] = dist[mask.geo.index(x, y, zc)];
      edt_1d(dims[1], f, pos, out, v, z);
      for (int y = 0; y < dims[1]; ++y) dist[mask.geo.index(x, y, zc)] = out[y];
    }
  }

  // Pass along z.
  for (int a = 0; a < dims[2]; ++a) pos[a] = a * sp[2];
  for (int y = 0; y < dims[1]; ++y) {
    for (int x = 0; x < dims[0]; ++x) {
      for (int zc = 0; zc < dims[2]; ++zc) f[zc] = dist[mask.geo.index(x, y, zc)];
      edt_1d(dims[2], f, pos, out, v, z);
      for (int zc = 0; zc < dims[2]; ++zc) dist[mask.geo.index(x, y, zc)] = out[zc];
    }
  }

  // An all-foreground grid has no background to measure against.
  for (auto& d : dist) {
    if (d == kInf) d = std::numeric_limits<double>::max();
  }
  return dist;
}

SoftMask3 smooth_boundary(const Mask3& mask, double ramp_width_mm) {
  if (ramp_width_mm <= 0) throw ParamError("smooth_boundary: ramp_width must be positive");
  const auto dist_sq = distance_to_background_sq(mask);
  SoftMask3 out = make_soft_mask(mask.geo, 0.0f);
  for (std::size_t i = 0; i < dist_sq.size(); ++i) {
    if (!mask.values[i]) continue;
    const double w = std::sqrt(dist_sq[i]) / ramp_width_mm;
    out.values[i] = static_cast<float>(std::clamp(w, 0.0, 1.0));
  }
  return out;
}

}  // namespace ctsynth
