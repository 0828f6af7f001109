#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "ctsynth/mesh.hpp"
#include "ctsynth/prior.hpp"
#include "ctsynth/volume.hpp"

namespace ctsynth {

// Contract for pattern generators: given a window-normalized patch and the
// lesion mask restricted to it, return a patch of identical dims with values
// in [-1, 1]. The trained network is not part of this artifact; anything
// satisfying this contract plugs in.
class PatternGenerator {
 public:
  virtual ~PatternGenerator() = default;
  virtual NormVolume generate(const NormVolume& patch, const Mask3& mask_patch) const = 0;
};

// Passes the patch through untouched. Used to verify lossless stitching.
class IdentityGenerator final : public PatternGenerator {
 public:
  NormVolume generate(const NormVolume& patch, const Mask3& mask_patch) const override;
};

enum class PatternStyle { GGO, CONSOLIDATION };

// Deterministic band-limited value-noise generator. Inside the mask it emits
// texture shaped to an HU band (GGO: mean -550, sd 80; CONSOLIDATION: mean
// -50, sd 60, converted through the patch window); GGO keeps 0.3 of the
// underlying patch signal so structures stay faintly visible. Outside the
// mask the patch is returned unchanged.
class ProceduralGenerator final : public PatternGenerator {
 public:
  ProceduralGenerator(PatternStyle style, std::uint64_t seed)
      : style_(style), seed_(seed) {}

  NormVolume generate(const NormVolume& patch, const Mask3& mask_patch) const override;

 private:
  PatternStyle style_;
  std::uint64_t seed_;
};

// Runs an external command per window, exchanging raw little-endian data over
// stdin/stdout. Request: 16-byte header (magic "CSG1", three uint32 dims),
// dims-product float32 patch, dims-product uint8 mask. Response: the same
// header followed by the float32 output patch. The child must consume the
// whole request before writing its response.
class SubprocessGenerator final : public PatternGenerator {
 public:
  explicit SubprocessGenerator(std::string command) : command_(std::move(command)) {}

  NormVolume generate(const NormVolume& patch, const Mask3& mask_patch) const override;

 private:
  std::string command_;
};

inline constexpr std::uint32_t kGeneratorWireMagic = 0x31475343u;  // "CSG1"

struct FusionParams {
  double beta = 0.7;    // weight of the synthetic image in the blend
  double alpha = 1.0;   // intensity adjustment for generated areas above -200 HU
  Window window{-600.0, 1500.0};
  int overlap_slices = 9;
  std::array<int, 3> patch_dims{384, 384, 18};
  std::array<double, 3> working_spacing{0.75, 0.75, 1.0};
  double ramp_width_mm = 3.0;  // boundary smoothing ramp
  double alpha_cutoff_hu = -200.0;
};

// Replaces masked voxels with i.i.d. uniform [-1, 1] samples; everything else
// is untouched.
NormVolume fill_noise(const NormVolume& patch, const Mask3& mask, std::uint64_t seed);

// Slides a patch_dims window along z in steps of (depth - overlap). For every
// window after the first, the leading `overlap` input slices are replaced by
// the previously committed output before the generator runs; the trailing
// slices are committed. The final window is end-aligned with its overlap
// recomputed. Volumes shorter than one window are edge-replicated to depth.
// In-plane dims must equal the patch dims.
NormVolume sliding_window_apply(const NormVolume& volume, const Mask3& mask,
                                const PatternGenerator& gen, const FusionParams& params);

// x_blend = beta*alpha*x_hat + (1-beta)*x_control where the generated voxel's
// HU equivalent exceeds the cutoff, beta*x_hat + (1-beta)*x_control otherwise;
// clipped to the normalized range.
NormVolume blend(const NormVolume& gen_out, const NormVolume& control,
                 const FusionParams& params);

// x_final = (1-w)*x_control + w*x_blend per voxel.
NormVolume fuse(const NormVolume& blend_out, const NormVolume& control,
                const SoftMask3& soft_mask);

struct SynthesisResult {
  HuVolume volume;
  Mask3 lesion_mask;
};

// End-to-end case synthesis: resample to the working grid, normalize, sample
// k lesion centers from the prior, synthesize/voxelize/place/union/crop the
// masks, noise-fill, run the generator through the sliding window, blend, and
// composite back onto the original control at its native grid. Deterministic
// for a fixed seed.
SynthesisResult synthesize_case(const HuVolume& control, const Mask3& lung,
                                const SpatialPrior& prior,
                                const LesionShapeParams& shape_params,
                                const FusionParams& fusion_params, int k_lesions,
                                std::uint64_t seed, const PatternGenerator& gen);

}  // namespace ctsynth
