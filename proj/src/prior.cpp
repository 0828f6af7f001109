#include "ctsynth/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctsynth/rng.hpp"

namespace ctsynth {

CanonicalTransform canonical_transform(const Mask3& lung,
                                       const std::array<int, 3>& grid_dims) {
  std::array<int, 3> lo{lung.geo.dims[0], lung.geo.dims[1], lung.geo.dims[2]};
  std::array<int, 3> hi{-1, -1, -1};
  const auto& d = lung.geo.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!lung.at(x, y, z)) continue;
        lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
        hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
      }
    }
  }
  if (hi[0] < 0) throw DataError("canonical_transform: empty lung mask");

  CanonicalTransform t;
  for (int a = 0; a < 3; ++a) {
    const int extent = hi[a] - lo[a] + 1;
    t.scale[a] = static_cast<double>(grid_dims[a]) / extent;
    t.offset[a] = lo[a];
  }
  return t;
}

namespace {

// Splat weights are accumulated in 2^32 fixed point so that duplicating the
// case list doubles every accumulator exactly, keeping the normalized prior
// bit-identical.
constexpr double kFixedScale = 4294967296.0;

void splat_trilinear(std::vector<std::uint64_t>& acc, const std::array<int, 3>& dims,
                     const std::array<double, 3>& g) {
  // Cell centers sit at i + 0.5 in canonical coordinates.
  double cx = g[0] - 0.5, cy = g[1] - 0.5, cz = g[2] - 0.5;
  cx = std::clamp(cx, 0.0, dims[0] - 1.0);
  cy = std::clamp(cy, 0.0, dims[1] - 1.0);
  cz = std::clamp(cz, 0.0, dims[2] - 1.0);
  const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy), z0 = static_cast<int>(cz);
  const int x1 = std::min(x0 + 1, dims[0] - 1);
  const int y1 = std::min(y0 + 1, dims[1] - 1);
  const int z1 = std::min(z0 + 1, dims[2] - 1);
  const double fx = cx - x0, fy = cy - y0, fz = cz - z0;

  auto idx = [&](int x, int y, int z) {
    return static_cast<std::size_t>(z) * dims[1] * dims[0] +
           static_cast<std::size_t>(y) * dims[0] + x;
  };
  const double w[8] = {(1 - fx) * (1 - fy) * (1 - fz), fx * (1 - fy) * (1 - fz),
                       (1 - fx) * fy * (1 - fz),       fx * fy * (1 - fz),
                       (1 - fx) * (1 - fy) * fz,       fx * (1 - fy) * fz,
                       (1 - fx) * fy * fz,             fx * fy * fz};
  const std::size_t cells[8] = {idx(x0, y0, z0), idx(x1, y0, z0), idx(x0, y1, z0),
                                idx(x1, y1, z0), idx(x0, y0, z1), idx(x1, y0, z1),
                                idx(x0, y1, z1), idx(x1, y1, z1)};
  for (int i = 0; i < 8; ++i) {
    acc[cells[i]] += static_cast<std::uint64_t>(std::llround(w[i] * kFixedScale));
  }
}

std::vector<double> box_smooth_3(const std::vector<double>& in,
                                 const std::array<int, 3>& dims) {
  std::vector<double> out(in.size());
  auto idx = [&](int x, int y, int z) {
    return static_cast<std::size_t>(z) * dims[1] * dims[0] +
           static_cast<std::size_t>(y) * dims[0] + x;
  };
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        double sum = 0;
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] || ny >= dims[1] ||
                  nz >= dims[2]) {
                continue;
              }
              sum += in[idx(nx, ny, nz)];
              ++n;
            }
          }
        }
        out[idx(x, y, z)] = sum / n;
      }
    }
  }
  return out;
}

}  // namespace

SpatialPrior build_prior(const std::vector<PriorCase>& cases,
                         const std::array<int, 3>& grid_dims, bool splat_full_masks) {
  if (cases.empty()) throw ParamError("build_prior: no cases");
  for (int a = 0; a < 3; ++a) {
    if (grid_dims[a] < 1) throw ParamError("build_prior: grid_dims must be positive");
  }

  SpatialPrior prior;
  prior.grid_dims = grid_dims;
  std::vector<std::uint64_t> acc(prior.cell_count(), 0);

  for (const auto& c : cases) {
    if (!c.lesion.geo.same_grid(c.lung.geo)) {
      throw GeometryError("build_prior: lesion/lung geometry mismatch");
    }
    if (c.lesion.empty_mask()) continue;
    const CanonicalTransform t = canonical_transform(c.lung, grid_dims);

    if (splat_full_masks) {
      const auto& d = c.lesion.geo.dims;
      for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
          for (int x = 0; x < d[0]; ++x) {
            if (!c.lesion.at(x, y, z)) continue;
            splat_trilinear(acc, grid_dims,
                            t.to_canonical({static_cast<double>(x), static_cast<double>(y),
                                            static_cast<double>(z)}));
          }
        }
      }
      continue;
    }

    const auto [labels, n_comp] = label_components(c.lesion);
    std::vector<double> sx(n_comp, 0), sy(n_comp, 0), sz(n_comp, 0);
    std::vector<std::size_t> cnt(n_comp, 0);
    const auto& d = c.lesion.geo.dims;
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        for (int x = 0; x < d[0]; ++x) {
          const auto l = labels[c.lesion.geo.index(x, y, z)];
          if (!l) continue;
          sx[l - 1] += x;
          sy[l - 1] += y;
          sz[l - 1] += z;
          ++cnt[l - 1];
        }
      }
    }
    for (int i = 0; i < n_comp; ++i) {
      splat_trilinear(acc, grid_dims,
                      t.to_canonical({sx[i] / cnt[i], sy[i] / cnt[i], sz[i] / cnt[i]}));
    }
  }

  std::uint64_t total = 0;
  for (auto a : acc) total += a;
  if (total == 0) throw DataError("build_prior: all cases empty of lesions");

  std::vector<double> probs(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    probs[i] = static_cast<double>(acc[i]) / static_cast<double>(total);
  }
  probs = box_smooth_3(probs, grid_dims);

  double sum = 0;
  for (double p : probs) sum += p;
  for (double& p : probs) p /= sum;
  prior.probs = std::move(probs);
  return prior;
}

std::vector<std::array<int, 3>> sample_centers(const SpatialPrior& prior, int k,
                                               const Mask3& lung, std::uint64_t seed) {
  if (k < 1) throw ParamError("sample_centers: k must be >= 1");
  if (prior.probs.size() != prior.cell_count()) {
    throw ParamError("sample_centers: malformed prior");
  }
  const CanonicalTransform t = canonical_transform(lung, prior.grid_dims);

  std::vector<double> cdf(prior.probs.size());
  double run = 0;
  for (std::size_t i = 0; i < prior.probs.size(); ++i) {
    run += prior.probs[i];
    cdf[i] = run;
  }

  SplitMix64 rng(seed);
  constexpr int kMaxRetries = 100;
  const auto& gd = prior.grid_dims;

  std::vector<std::array<int, 3>> out;
  out.reserve(k);
  for (int s = 0; s < k; ++s) {
    std::array<int, 3> voxel{};
    bool found = false;
    std::array<double, 3> last{};
    for (int attempt = 0; attempt < kMaxRetries && !found; ++attempt) {
      const double u = rng.next_double() * run;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      std::size_t cell = static_cast<std::size_t>(it - cdf.begin());
      if (cell >= prior.probs.size()) cell = prior.probs.size() - 1;
      const int cz = static_cast<int>(cell / (static_cast<std::size_t>(gd[0]) * gd[1]));
      const int rem = static_cast<int>(cell % (static_cast<std::size_t>(gd[0]) * gd[1]));
      const int cy = rem / gd[0];
      const int cx = rem % gd[0];
      const std::array<double, 3> g{cx + rng.next_double(), cy + rng.next_double(),
                                    cz + rng.next_double()};
      last = t.to_voxel(g);
      const int vx = static_cast<int>(std::lround(last[0]));
      const int vy = static_cast<int>(std::lround(last[1]));
      const int vz = static_cast<int>(std::lround(last[2]));
      if (lung.geo.contains(vx, vy, vz) && lung.at(vx, vy, vz)) {
        voxel = {vx, vy, vz};
        found = true;
      }
    }
    if (!found) {
      // Snap the last rejected candidate to the nearest in-lung voxel (mm).
      double best = std::numeric_limits<double>::max();
      const auto& d = lung.geo.dims;
      const auto& sp = lung.geo.spacing;
      for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
          for (int x = 0; x < d[0]; ++x) {
            if (!lung.at(x, y, z)) continue;
            const double dx = (x - last[0]) * sp[0];
            const double dy = (y - last[1]) * sp[1];
            const double dz = (z - last[2]) * sp[2];
            const double dd = dx * dx + dy * dy + dz * dz;
            if (dd < best) {
              best = dd;
              voxel = {x, y, z};
            }
          }
        }
      }
      if (best == std::numeric_limits<double>::max()) {
        throw DataError("sample_centers: empty lung mask");
      }
    }
    out.push_back(voxel);
  }
  return out;
}

void save_prior(const SpatialPrior& prior, const std::string& path) {
  SoftMask3 m;
  m.geo.dims = prior.grid_dims;
  m.geo.spacing = {1, 1, 1};
  m.geo.origin = {0, 0, 0};
  m.values.assign(prior.probs.begin(), prior.probs.end());
  save_mhd(m, path);
}

SpatialPrior load_prior(const std::string& path) {
  const SoftMask3 m = load_float_mhd(path);
  SpatialPrior prior;
  prior.grid_dims = m.geo.dims;
  prior.probs.assign(m.values.begin(), m.values.end());
  double sum = 0;
  for (double p : prior.probs) {
    if (p < 0) throw FormatError("load_prior: negative probability in " + path);
    sum += p;
  }
  if (sum <= 0) throw FormatError("load_prior: prior sums to zero in " + path);
  for (double& p : prior.probs) p /= sum;  // float storage re-normalized on load
  return prior;
}

}  // namespace ctsynth
