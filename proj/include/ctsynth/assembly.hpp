#pragma once

#include <array>
#include <vector>

#include "ctsynth/volume.hpp"

namespace ctsynth {

// Translates `component` so its foreground centroid lands on `center` (canvas
// voxel coordinates) and ORs it into a copy of `canvas`. Out-of-bounds voxels
// are clipped. Spacings must match; resample_mask first otherwise.
Mask3 place_component(const Mask3& canvas, const Mask3& component,
                      const std::array<int, 3>& center);

// Voxelwise OR over identically shaped masks.
Mask3 union_masks(const std::vector<Mask3>& masks);

// Voxelwise AND.
Mask3 crop_to_lung(const Mask3& mask, const Mask3& lung);

// Linear-ramp boundary weights: weight = clip(dist_inside / ramp_width, 0, 1)
// where dist_inside is the Euclidean distance (mm) from a foreground voxel
// center to the nearest background voxel center, and 0 outside the mask.
SoftMask3 smooth_boundary(const Mask3& mask, double ramp_width_mm);

// Exact squared Euclidean distance (mm^2) to the nearest background voxel
// center, per voxel; 0 on background. Separable lower-envelope passes.
std::vector<double> distance_to_background_sq(const Mask3& mask);

}  // namespace ctsynth
