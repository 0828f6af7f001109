#include "ctsynth/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstring>
#include <mutex>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "ctsynth/assembly.hpp"
#include "ctsynth/rng.hpp"

namespace ctsynth {

namespace {

std::int16_t to_hu(double v) {
  return static_cast<std::int16_t>(std::clamp<long>(std::lround(v), kHuMin, kHuMax));
}

float clip_range(double v, RangeTag tag) {
  const double lo = tag == RangeTag::SYM ? -1.0 : 0.0;
  return static_cast<float>(std::clamp(v, lo, 1.0));
}

}  // namespace

// --- Identity ------------------------------------------------------------------

NormVolume IdentityGenerator::generate(const NormVolume& patch, const Mask3&) const {
  return patch;
}

// --- Procedural texture ----------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Lattice value in [-1, 1], a pure function of (seed, octave, cell).
double lattice_value(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy,
                     std::int64_t iz) {
  std::uint64_t h = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(octave + 1);
  h = mix64(h ^ (static_cast<std::uint64_t>(ix) * 0xD6E8FEB86659FD93ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(iy) * 0xCA5A826395121157ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(iz) * 0x9E3779B97F4A7C15ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

// Trilinear interpolation of lattice values with cell edge `period` voxels.
double value_noise(std::uint64_t seed, int octave, double x, double y, double z,
                   double period) {
  const double gx = x / period, gy = y / period, gz = z / period;
  const auto fx = gx - std::floor(gx), fy = gy - std::floor(gy), fz = gz - std::floor(gz);
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  const auto iz = static_cast<std::int64_t>(std::floor(gz));

  auto lv = [&](int dx, int dy, int dz) {
    return lattice_value(seed, octave, ix + dx, iy + dy, iz + dz);
  };
  const double c00 = lv(0, 0, 0) * (1 - fx) + lv(1, 0, 0) * fx;
  const double c10 = lv(0, 1, 0) * (1 - fx) + lv(1, 1, 0) * fx;
  const double c01 = lv(0, 0, 1) * (1 - fx) + lv(1, 0, 1) * fx;
  const double c11 = lv(0, 1, 1) * (1 - fx) + lv(1, 1, 1) * fx;
  return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz;
}

// Three octaves, amplitudes 1/0.5/0.25; empirical standard deviation of the
// combined field, used to rescale it to unit sd.
constexpr double kNoiseSd = 0.21;

double band_noise(std::uint64_t seed, double x, double y, double z) {
  const double n = value_noise(seed, 0, x, y, z, 8.0) +
                   0.5 * value_noise(seed, 1, x, y, z, 4.0) +
                   0.25 * value_noise(seed, 2, x, y, z, 2.0);
  return n / 1.75 / kNoiseSd;
}

}  // namespace

NormVolume ProceduralGenerator::generate(const NormVolume& patch,
                                         const Mask3& mask_patch) const {
  if (!patch.geo.same_grid(mask_patch.geo)) {
    throw GeometryError("ProceduralGenerator: patch/mask geometry mismatch");
  }
  const double mean_hu = style_ == PatternStyle::GGO ? -550.0 : -50.0;
  const double sd_hu = style_ == PatternStyle::GGO ? 80.0 : 60.0;
  const double passthrough = style_ == PatternStyle::GGO ? 0.3 : 0.0;

  NormVolume out = patch;
  const auto& d = patch.geo.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!mask_patch.at(x, y, z)) continue;
        const double hu = mean_hu + sd_hu * band_noise(seed_, x, y, z);
        const double tex = normalize_value(hu, patch.window, patch.tag);
        const double v = (1.0 - passthrough) * tex + passthrough * patch.at(x, y, z);
        out.at(x, y, z) = clip_range(v, patch.tag);
      }
    }
  }
  return out;
}

// --- Subprocess generator -----------------------------------------------------------

namespace {

void write_all(int fd, const void* data, std::size_t n) {
  const char* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw IoError("generator subprocess: write failed");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all(int fd, void* data, std::size_t n) {
  char* p = static_cast<char*>(data);
  while (n > 0) {
    const ssize_t r = ::read(fd, p, n);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("generator subprocess: read failed");
    }
    if (r == 0) throw IoError("generator subprocess: unexpected EOF");
    p += r;
    n -= static_cast<std::size_t>(r);
  }
}

struct WireHeader {
  std::uint32_t magic;
  std::uint32_t dims[3];
};
static_assert(sizeof(WireHeader) == 16);

struct Fd {
  int fd = -1;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
};

std::once_flag g_sigpipe_once;

}  // namespace

NormVolume SubprocessGenerator::generate(const NormVolume& patch,
                                         const Mask3& mask_patch) const {
  if (!patch.geo.same_grid(mask_patch.geo)) {
    throw GeometryError("SubprocessGenerator: patch/mask geometry mismatch");
  }
  // A dying child must surface as EPIPE, not kill the process.
  std::call_once(g_sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
    throw IoError("generator subprocess: pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw IoError("generator subprocess: fork() failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  Fd to{to_child[1]};
  Fd from{from_child[0]};

  NormVolume out = patch;
  try {
    const auto& d = patch.geo.dims;
    WireHeader hdr{kGeneratorWireMagic,
                   {static_cast<std::uint32_t>(d[0]), static_cast<std::uint32_t>(d[1]),
                    static_cast<std::uint32_t>(d[2])}};
    write_all(to.fd, &hdr, sizeof(hdr));
    write_all(to.fd, patch.values.data(), patch.values.size() * sizeof(float));
    write_all(to.fd, mask_patch.values.data(), mask_patch.values.size());
    to.reset();

    WireHeader resp{};
    read_all(from.fd, &resp, sizeof(resp));
    if (resp.magic != kGeneratorWireMagic || resp.dims[0] != hdr.dims[0] ||
        resp.dims[1] != hdr.dims[1] || resp.dims[2] != hdr.dims[2]) {
      throw IoError("generator subprocess: bad response header");
    }
    read_all(from.fd, out.values.data(), out.values.size() * sizeof(float));
    from.reset();
  } catch (...) {
    to.reset();
    from.reset();
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw;
  }

  int status = 0;
  ::waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw IoError("generator subprocess exited with status " +
                  std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  for (auto& v : out.values) v = clip_range(v, out.tag);
  return out;
}

// --- Noise fill -----------------------------------------------------------------------

NormVolume fill_noise(const NormVolume& patch, const Mask3& mask, std::uint64_t seed) {
  if (!patch.geo.same_grid(mask.geo)) throw GeometryError("fill_noise: geometry mismatch");
  NormVolume out = patch;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (mask.values[i]) {
      out.values[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
  }
  return out;
}

// --- Sliding window -----------------------------------------------------------------------

namespace {

NormVolume extract_window(const NormVolume& v, int z0, int depth) {
  NormVolume w;
  w.geo = v.geo;
  w.geo.dims[2] = depth;
  w.geo.origin[2] = v.geo.origin[2] + z0 * v.geo.spacing[2];
  w.tag = v.tag;
  w.window = v.window;
  const std::size_t slice = static_cast<std::size_t>(v.geo.dims[0]) * v.geo.dims[1];
  w.values.resize(slice * depth);
  std::copy_n(v.values.begin() + static_cast<std::ptrdiff_t>(slice) * z0, slice * depth,
              w.values.begin());
  return w;
}

Mask3 extract_mask_window(const Mask3& m, int z0, int depth) {
  Mask3 w;
  w.geo = m.geo;
  w.geo.dims[2] = depth;
  w.geo.origin[2] = m.geo.origin[2] + z0 * m.geo.spacing[2];
  const std::size_t slice = static_cast<std::size_t>(m.geo.dims[0]) * m.geo.dims[1];
  w.values.resize(slice * depth);
  std::copy_n(m.values.begin() + static_cast<std::ptrdiff_t>(slice) * z0, slice * depth,
              w.values.begin());
  return w;
}

}  // namespace

NormVolume sliding_window_apply(const NormVolume& volume, const Mask3& mask,
                                const PatternGenerator& gen, const FusionParams& params) {
  if (!volume.geo.same_grid(mask.geo)) {
    throw GeometryError("sliding_window_apply: volume/mask geometry mismatch");
  }
  const int depth = params.patch_dims[2];
  if (depth < 1) throw ParamError("sliding_window_apply: patch depth must be positive");
  if (params.overlap_slices < 0 || params.overlap_slices >= depth) {
    throw ParamError("sliding_window_apply: overlap must be in [0, depth)");
  }
  if (volume.geo.dims[0] != params.patch_dims[0] ||
      volume.geo.dims[1] != params.patch_dims[1]) {
    throw ParamError("sliding_window_apply: in-plane dims must equal the patch dims");
  }

  const int nz = volume.geo.dims[2];
  const std::size_t slice = static_cast<std::size_t>(volume.geo.dims[0]) * volume.geo.dims[1];

  if (nz < depth) {
    // Edge-replicate to one full window, then crop the output back.
    NormVolume padded = volume;
    padded.geo.dims[2] = depth;
    padded.values.resize(slice * depth);
    Mask3 padded_mask = mask;
    padded_mask.geo.dims[2] = depth;
    padded_mask.values.resize(slice * depth);
    for (int z = nz; z < depth; ++z) {
      std::copy_n(volume.values.begin() + static_cast<std::ptrdiff_t>(slice) * (nz - 1),
                  slice, padded.values.begin() + static_cast<std::ptrdiff_t>(slice) * z);
      std::copy_n(mask.values.begin() + static_cast<std::ptrdiff_t>(slice) * (nz - 1), slice,
                  padded_mask.values.begin() + static_cast<std::ptrdiff_t>(slice) * z);
    }
    NormVolume gen_out = gen.generate(padded, padded_mask);
    if (gen_out.geo.dims != padded.geo.dims) {
      throw DataError("sliding_window_apply: generator returned wrong dims");
    }
    NormVolume out = volume;
    std::copy_n(gen_out.values.begin(), slice * nz, out.values.begin());
    return out;
  }

  std::vector<int> starts;
  {
    const int step = depth - params.overlap_slices;
    int z = 0;
    while (true) {
      starts.push_back(z);
      if (z + depth >= nz) break;
      z += step;
      if (z + depth > nz) z = nz - depth;  // end-align the final window
    }
  }

  NormVolume out = volume;
  for (std::size_t wi = 0; wi < starts.size(); ++wi) {
    const int z0 = starts[wi];
    // Slices of this window already committed by previous steps.
    const int ov = wi == 0 ? 0 : starts[wi - 1] + depth - z0;

    NormVolume patch = extract_window(volume, z0, depth);
    if (ov > 0) {
      // Condition on the previous output across the overlap.
      std::copy_n(out.values.begin() + static_cast<std::ptrdiff_t>(slice) * z0,
                  slice * static_cast<std::size_t>(ov), patch.values.begin());
    }
    const Mask3 mask_patch = extract_mask_window(mask, z0, depth);
    const NormVolume gen_out = gen.generate(patch, mask_patch);
    if (gen_out.geo.dims != patch.geo.dims) {
      throw DataError("sliding_window_apply: generator returned wrong dims");
    }
    std::copy_n(gen_out.values.begin() + static_cast<std::ptrdiff_t>(slice) * ov,
                slice * static_cast<std::size_t>(depth - ov),
                out.values.begin() + static_cast<std::ptrdiff_t>(slice) * (z0 + ov));
  }
  return out;
}

// --- Blend & fuse ------------------------------------------------------------------------

NormVolume blend(const NormVolume& gen_out, const NormVolume& control,
                 const FusionParams& params) {
  if (!gen_out.geo.same_grid(control.geo)) throw GeometryError("blend: geometry mismatch");
  if (params.beta < 0 || params.beta > 1) throw ParamError("blend: beta must be in [0, 1]");
  if (params.alpha <= 0) throw ParamError("blend: alpha must be positive");

  NormVolume out = gen_out;
  const double beta = params.beta;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double xhat = gen_out.values[i];
    const double xc = control.values[i];
    const double hu = denormalize_value(xhat, gen_out.window, gen_out.tag);
    // The intensity adjustment applies only to generated areas above the cutoff.
    const double scaled = hu > params.alpha_cutoff_hu ? params.alpha * xhat : xhat;
    out.values[i] = clip_range(beta * scaled + (1.0 - beta) * xc, out.tag);
  }
  return out;
}

NormVolume fuse(const NormVolume& blend_out, const NormVolume& control,
                const SoftMask3& soft_mask) {
  if (!blend_out.geo.same_grid(control.geo) || !blend_out.geo.same_grid(soft_mask.geo)) {
    throw GeometryError("fuse: geometry mismatch");
  }
  NormVolume out = control;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double w = soft_mask.values[i];
    out.values[i] =
        clip_range((1.0 - w) * control.values[i] + w * blend_out.values[i], out.tag);
  }
  return out;
}

// --- End-to-end case synthesis -------------------------------------------------------------

SynthesisResult synthesize_case(const HuVolume& control, const Mask3& lung,
                                const SpatialPrior& prior,
                                const LesionShapeParams& shape_params,
                                const FusionParams& fusion_params, int k_lesions,
                                std::uint64_t seed, const PatternGenerator& gen) {
  if (!control.geo.same_grid(lung.geo)) {
    throw GeometryError("synthesize_case: control/lung geometry mismatch");
  }
  if (k_lesions < 0) throw ParamError("synthesize_case: negative lesion count");

  // Working grid: inference resolution, in-plane box centered on the lungs.
  HuVolume work_hu = resample(control, fusion_params.working_spacing);
  Mask3 work_lung = resample_mask_to_geometry(lung, work_hu.geo);

  std::array<double, 3> center{-1, -1, -1};
  if (!work_lung.empty_mask()) {
    const auto c = mask_centroid(work_lung);
    center = {c[0], c[1], -1};
  }
  const std::array<int, 3> inplane{fusion_params.patch_dims[0], fusion_params.patch_dims[1], 0};
  work_hu = crop_or_pad(work_hu, inplane, center);
  work_lung = crop_or_pad_mask(work_lung, inplane, center);

  // Synthesize and place the component masks.
  Mask3 lesion_work = make_mask(work_hu.geo);
  if (k_lesions > 0) {
    const auto centers =
        sample_centers(prior, k_lesions, work_lung, derive_seed(seed, 1));
    for (int i = 0; i < k_lesions; ++i) {
      LesionShapeParams sp = shape_params;
      sp.rng_seed = derive_seed(seed, 2 + static_cast<std::uint64_t>(i));
      const TriMesh mesh = synthesize_lesion_mesh(sp);
      const Mask3 comp = voxelize(mesh, fusion_params.working_spacing, 1.0);
      lesion_work = place_component(lesion_work, comp, centers[i]);
    }
  }
  lesion_work = crop_to_lung(lesion_work, work_lung);

  if (lesion_work.empty_mask()) {
    return {control, make_mask(control.geo)};
  }

  // Inject pattern intensities on the working grid.
  const NormVolume work_norm =
      normalize_window(work_hu, fusion_params.window, RangeTag::SYM);
  const SoftMask3 soft = smooth_boundary(lesion_work, fusion_params.ramp_width_mm);
  const NormVolume noised = fill_noise(work_norm, lesion_work, derive_seed(seed, 1000));
  const NormVolume gen_out = sliding_window_apply(noised, lesion_work, gen, fusion_params);
  const NormVolume blended = blend(gen_out, work_norm, fusion_params);

  // Composite onto the original grid in HU space: x_final keeps the control
  // wherever the smoothed mask weight is zero.
  const HuVolume blend_hu = denormalize_window(blended);
  const HuVolume blend_orig = resample_to_geometry(blend_hu, control.geo);
  const SoftMask3 w_orig = resample_soft_to_geometry(soft, control.geo);

  HuVolume out = control;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double w = w_orig.values[i];
    if (w > 0.0) {
      out.values[i] = to_hu((1.0 - w) * control.values[i] + w * blend_orig.values[i]);
    }
  }

  Mask3 mask_orig = resample_mask_to_geometry(lesion_work, control.geo);
  mask_orig = crop_to_lung(mask_orig, lung);
  return {std::move(out), std::move(mask_orig)};
}

}  // namespace ctsynth
