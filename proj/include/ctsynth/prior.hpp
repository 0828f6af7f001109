#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctsynth/volume.hpp"

namespace ctsynth {

// Probability map over a canonical lung-box grid; probs sum to 1.
struct SpatialPrior {
  std::array<int, 3> grid_dims{64, 64, 64};
  std::vector<double> probs;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(grid_dims[0]) * grid_dims[1] * grid_dims[2];
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(z) * grid_dims[1] * grid_dims[0] +
           static_cast<std::size_t>(y) * grid_dims[0] + x;
  }
};

// Per-axis affine mapping voxel coordinates of a lung bounding box onto the
// canonical grid: g = (v - bb_min) * grid / extent.
struct CanonicalTransform {
  std::array<double, 3> scale{1, 1, 1};
  std::array<double, 3> offset{0, 0, 0};  // bb_min in voxel coordinates

  std::array<double, 3> to_canonical(const std::array<double, 3>& voxel) const {
    return {(voxel[0] - offset[0]) * scale[0], (voxel[1] - offset[1]) * scale[1],
            (voxel[2] - offset[2]) * scale[2]};
  }
  std::array<double, 3> to_voxel(const std::array<double, 3>& canonical) const {
    return {canonical[0] / scale[0] + offset[0], canonical[1] / scale[1] + offset[1],
            canonical[2] / scale[2] + offset[2]};
  }
};

// Maps the tight bounding box of the lung mask onto [0, grid_dims) per axis.
CanonicalTransform canonical_transform(const Mask3& lung,
                                       const std::array<int, 3>& grid_dims);

struct PriorCase {
  Mask3 lesion;
  Mask3 lung;
};

// Accumulates one trilinear splat per lesion connected component centroid
// (mapped through the case's canonical transform), box-smooths with a 3^3
// kernel and normalizes to sum 1. When splat_full_masks is set, every lesion
// voxel is splatted instead of the centroid (visualization variant).
SpatialPrior build_prior(const std::vector<PriorCase>& cases,
                         const std::array<int, 3>& grid_dims,
                         bool splat_full_masks = false);

// Draws k lesion centers: categorical draw over grid cells, uniform jitter
// within the cell, mapped through the inverse canonical transform of `lung`.
// Samples outside the lung are redrawn (up to 100 retries), then snapped to
// the nearest in-lung voxel.
std::vector<std::array<int, 3>> sample_centers(const SpatialPrior& prior, int k,
                                               const Mask3& lung, std::uint64_t seed);

// Persistence via MetaImage (MET_FLOAT with grid_dims as DimSize).
void save_prior(const SpatialPrior& prior, const std::string& path);
SpatialPrior load_prior(const std::string& path);

}  // namespace ctsynth
