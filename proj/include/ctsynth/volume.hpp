#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ctsynth/error.hpp"

namespace ctsynth {

inline constexpr std::int16_t kHuMin = -1024;
inline constexpr std::int16_t kHuMax = 3071;
inline constexpr std::int16_t kHuAir = -1024;

enum class RangeTag { SYM, UNIT };  // SYM -> [-1,1], UNIT -> [0,1]

struct Window {
  double level = -600.0;
  double width = 1500.0;
};

// Grid metadata shared by every container. `origin` is the world-space (mm)
// position of the center of voxel (0,0,0); voxel (x,y,z) sits at
// origin + {x,y,z} * spacing. Samples are stored x-fastest.
struct Geometry {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(z) * dims[1] * dims[0] +
           static_cast<std::size_t>(y) * dims[0] + x;
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }
  bool same_grid(const Geometry& o, double tol = 1e-6) const;
};

struct HuVolume {
  Geometry geo;
  std::vector<std::int16_t> values;

  std::int16_t at(int x, int y, int z) const { return values[geo.index(x, y, z)]; }
  std::int16_t& at(int x, int y, int z) { return values[geo.index(x, y, z)]; }
};

struct NormVolume {
  Geometry geo;
  std::vector<float> values;
  RangeTag tag = RangeTag::SYM;
  Window window;

  float at(int x, int y, int z) const { return values[geo.index(x, y, z)]; }
  float& at(int x, int y, int z) { return values[geo.index(x, y, z)]; }
};

struct Mask3 {
  Geometry geo;
  std::vector<std::uint8_t> values;

  std::uint8_t at(int x, int y, int z) const { return values[geo.index(x, y, z)]; }
  std::uint8_t& at(int x, int y, int z) { return values[geo.index(x, y, z)]; }
  std::size_t foreground_count() const;
  bool empty_mask() const { return foreground_count() == 0; }
};

struct SoftMask3 {
  Geometry geo;
  std::vector<float> values;

  float at(int x, int y, int z) const { return values[geo.index(x, y, z)]; }
  float& at(int x, int y, int z) { return values[geo.index(x, y, z)]; }
};

HuVolume make_hu_volume(const Geometry& geo, std::int16_t fill = 0);
Mask3 make_mask(const Geometry& geo, std::uint8_t fill = 0);
SoftMask3 make_soft_mask(const Geometry& geo, float fill = 0.0f);

// --- MetaImage I/O -----------------------------------------------------------
//
// Header keys are emitted in the fixed order: ObjectType, NDims, BinaryData,
// BinaryDataByteOrderMSB, DimSize, ElementSpacing, Offset, ElementType,
// ElementDataFile. Payload is raw little-endian, x-fastest, in a sibling
// .raw file. Element types: MET_SHORT (HU), MET_UCHAR (binary mask),
// MET_FLOAT (soft mask / normalized volume / prior).

using MhdContent = std::variant<HuVolume, Mask3>;

// Dispatches on ElementType: MET_SHORT -> HuVolume (clamped to [-1024, 3071]),
// MET_UCHAR -> Mask3 (nonzero bytes normalized to 1).
MhdContent load_mhd(const std::string& path);

HuVolume load_hu_mhd(const std::string& path);
Mask3 load_mask_mhd(const std::string& path);
SoftMask3 load_float_mhd(const std::string& path);  // MET_FLOAT payloads

void save_mhd(const HuVolume& v, const std::string& path);
void save_mhd(const Mask3& m, const std::string& path);
void save_mhd(const SoftMask3& m, const std::string& path);
void save_mhd(const NormVolume& v, const std::string& path);

// --- Resampling --------------------------------------------------------------

// Trilinear resampling onto a grid with the requested spacing. Output dims are
// round-half-up of dims*spacing/target (min 1 per axis); origin is preserved.
// The continuous sample index is edge-clamped, so a constant field stays
// constant and identity spacing is an exact copy.
HuVolume resample(const HuVolume& v, const std::array<double, 3>& target_spacing);

// Nearest-neighbor counterpart for binary masks.
Mask3 resample_mask(const Mask3& m, const std::array<double, 3>& target_spacing);

// World-coordinate mapping onto an arbitrary target grid. Samples outside the
// source extent take -1024 HU (volumes), 0 (masks and soft masks).
HuVolume resample_to_geometry(const HuVolume& v, const Geometry& target);
Mask3 resample_mask_to_geometry(const Mask3& m, const Geometry& target);
SoftMask3 resample_soft_to_geometry(const SoftMask3& m, const Geometry& target);

// --- Windowing ---------------------------------------------------------------

// SYM: clip(2*(hu - level)/width, -1, 1); UNIT: clip((hu - level)/width + 0.5, 0, 1).
NormVolume normalize_window(const HuVolume& v, double level, double width, RangeTag tag);
NormVolume normalize_window(const HuVolume& v, const Window& w, RangeTag tag);

// Inverse of the stored mapping; clipped values are unrecoverable and map to
// the window edge HU. Output rounded to the nearest integer HU.
HuVolume denormalize_window(const NormVolume& v);

double normalize_value(double hu, const Window& w, RangeTag tag);
double denormalize_value(double norm, const Window& w, RangeTag tag);

// --- Preprocessing presets ----------------------------------------------------

// Fixed resample/crop/window combinations used by the downstream networks.
// spacing 0 = keep input spacing on that axis; crop 0 = keep input extent.
struct PreprocessPreset {
  std::array<double, 3> spacing;
  std::array<int, 3> crop_dims;
  Window window;
  RangeTag tag;
};

inline constexpr PreprocessPreset kInpaintPreset{
    {0.75, 0.75, 1.0}, {384, 384, 0}, {-600.0, 1500.0}, RangeTag::SYM};
inline constexpr PreprocessPreset kLesionSeg2dPreset{
    {0.6, 0.6, 0.0}, {512, 512, 0}, {-150.0, 1174.0}, RangeTag::SYM};
inline constexpr PreprocessPreset kLesionSeg3dPreset{
    {1.0, 1.0, 3.0}, {384, 384, 128}, {-600.0, 1500.0}, RangeTag::UNIT};
inline constexpr PreprocessPreset kLungSegPreset{
    {2.0, 2.0, 2.0}, {0, 0, 0}, {-624.0, 1500.0}, RangeTag::SYM};

// Resample, center-crop/air-pad around `center_voxel` (input voxel coordinates;
// negative component = volume center), then window-normalize.
NormVolume apply_preset(const HuVolume& v, const PreprocessPreset& preset,
                        const std::array<double, 3>& center_voxel = {-1, -1, -1});

// Crop or pad to target dims (0 = keep axis) around a voxel center, adjusting
// the origin so world positions are unchanged. Pads with -1024 HU.
HuVolume crop_or_pad(const HuVolume& v, const std::array<int, 3>& target_dims,
                     const std::array<double, 3>& center_voxel);
Mask3 crop_or_pad_mask(const Mask3& m, const std::array<int, 3>& target_dims,
                       const std::array<double, 3>& center_voxel);

// --- Mask utilities ------------------------------------------------------------

// 6-connected component labeling. Returns per-voxel labels (0 = background,
// components numbered from 1) and the number of components.
std::pair<std::vector<std::int32_t>, int> label_components(const Mask3& m);

// Foreground centroid in continuous voxel coordinates. Throws on empty mask.
std::array<double, 3> mask_centroid(const Mask3& m);

// --- Validators (range invariants; used by tests) ------------------------------

void validate(const HuVolume& v);
void validate(const NormVolume& v);
void validate(const Mask3& m);
void validate(const SoftMask3& m);

}  // namespace ctsynth
