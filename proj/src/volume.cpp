#include "ctsynth/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace ctsynth {

namespace {

constexpr double kGridTol = 1e-6;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

bool Geometry::same_grid(const Geometry& o, double tol) const {
  if (dims != o.dims) return false;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(spacing[a] - o.spacing[a]) > tol) return false;
    if (std::abs(origin[a] - o.origin[a]) > tol) return false;
  }
  return true;
}

std::size_t Mask3::foreground_count() const {
  std::size_t n = 0;
  for (auto v : values) n += (v != 0);
  return n;
}

HuVolume make_hu_volume(const Geometry& geo, std::int16_t fill) {
  return {geo, std::vector<std::int16_t>(geo.voxel_count(), fill)};
}

Mask3 make_mask(const Geometry& geo, std::uint8_t fill) {
  return {geo, std::vector<std::uint8_t>(geo.voxel_count(), fill)};
}

SoftMask3 make_soft_mask(const Geometry& geo, float fill) {
  return {geo, std::vector<float>(geo.voxel_count(), fill)};
}

// --- MetaImage I/O -----------------------------------------------------------

namespace {

struct MhdHeader {
  int ndims = 0;
  Geometry geo;
  std::string element_type;
  std::string data_file;
  bool msb = false;
};

std::vector<double> parse_numbers(const std::string& value, std::size_t expect,
                                  const std::string& key) {
  std::istringstream iss(value);
  std::vector<double> out;
  double v;
  while (iss >> v) out.push_back(v);
  if (out.size() != expect) {
    throw FormatError("MetaImage key '" + key + "' expected " + std::to_string(expect) +
                      " values, got '" + value + "'");
  }
  return out;
}

MhdHeader parse_mhd_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open MetaImage header: " + path);

  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("garbled MetaImage header line: " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto require = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("MetaImage header missing key '" + key + "': " + path);
    return it->second;
  };

  MhdHeader h;
  h.ndims = static_cast<int>(parse_numbers(require("NDims"), 1, "NDims")[0]);
  if (h.ndims != 3) {
    throw FormatError("unsupported NDims = " + std::to_string(h.ndims) + " (only 3 supported)");
  }
  const auto dims = parse_numbers(require("DimSize"), 3, "DimSize");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1 || dims[a] != std::floor(dims[a])) {
      throw FormatError("bad DimSize in " + path);
    }
    h.geo.dims[a] = static_cast<int>(dims[a]);
  }
  if (kv.count("ElementSpacing")) {
    const auto sp = parse_numbers(kv["ElementSpacing"], 3, "ElementSpacing");
    for (int a = 0; a < 3; ++a) {
      if (sp[a] <= 0) throw FormatError("non-positive ElementSpacing in " + path);
      h.geo.spacing[a] = sp[a];
    }
  }
  if (kv.count("Offset")) {
    const auto off = parse_numbers(kv["Offset"], 3, "Offset");
    for (int a = 0; a < 3; ++a) h.geo.origin[a] = off[a];
  }
  h.element_type = require("ElementType");
  h.data_file = require("ElementDataFile");
  if (h.data_file == "LOCAL" || h.data_file == "LIST") {
    throw FormatError("ElementDataFile = " + h.data_file + " is not supported");
  }
  if (kv.count("BinaryDataByteOrderMSB")) {
    h.msb = (kv["BinaryDataByteOrderMSB"] == "True");
  }
  return h;
}

std::string data_path_for(const std::string& header_path, const std::string& data_file) {
  const std::filesystem::path hp(header_path);
  const std::filesystem::path dp(data_file);
  if (dp.is_absolute()) return dp.string();
  return (hp.parent_path() / dp).string();
}

std::vector<char> read_payload(const std::string& header_path, const MhdHeader& h,
                               std::size_t elem_size) {
  const std::string dpath = data_path_for(header_path, h.data_file);
  std::ifstream in(dpath, std::ios::binary);
  if (!in) throw IoError("cannot open MetaImage data file: " + dpath);
  const std::size_t want = h.geo.voxel_count() * elem_size;
  std::vector<char> buf(want);
  in.read(buf.data(), static_cast<std::streamsize>(want));
  if (static_cast<std::size_t>(in.gcount()) != want) {
    throw FormatError("MetaImage data file truncated: " + dpath + " (expected " +
                      std::to_string(want) + " bytes, got " + std::to_string(in.gcount()) + ")");
  }
  return buf;
}

void byteswap(char* data, std::size_t count, std::size_t elem_size) {
  for (std::size_t i = 0; i < count; ++i) {
    std::reverse(data + i * elem_size, data + (i + 1) * elem_size);
  }
}

HuVolume load_hu_from(const std::string& path, const MhdHeader& h) {
  if (h.element_type != "MET_SHORT") {
    throw FormatError("expected MET_SHORT volume, got " + h.element_type + ": " + path);
  }
  auto buf = read_payload(path, h, 2);
  if (h.msb) byteswap(buf.data(), h.geo.voxel_count(), 2);
  HuVolume v{h.geo, std::vector<std::int16_t>(h.geo.voxel_count())};
  std::memcpy(v.values.data(), buf.data(), buf.size());
  for (auto& s : v.values) s = std::clamp(s, kHuMin, kHuMax);
  return v;
}

Mask3 load_mask_from(const std::string& path, const MhdHeader& h) {
  if (h.element_type != "MET_UCHAR") {
    throw FormatError("expected MET_UCHAR mask, got " + h.element_type + ": " + path);
  }
  auto buf = read_payload(path, h, 1);
  Mask3 m{h.geo, std::vector<std::uint8_t>(h.geo.voxel_count())};
  for (std::size_t i = 0; i < buf.size(); ++i) {
    m.values[i] = buf[i] ? 1 : 0;
  }
  return m;
}

void write_mhd_pair(const Geometry& geo, const std::string& element_type, const void* data,
                    std::size_t bytes, const std::string& path) {
  const std::filesystem::path hp(path);
  std::filesystem::path rp(hp);
  rp.replace_extension(".raw");

  std::ofstream hdr(path);
  if (!hdr) throw IoError("cannot write MetaImage header: " + path);
  hdr << "ObjectType = Image\n";
  hdr << "NDims = 3\n";
  hdr << "BinaryData = True\n";
  hdr << "BinaryDataByteOrderMSB = False\n";
  hdr << "DimSize = " << geo.dims[0] << " " << geo.dims[1] << " " << geo.dims[2] << "\n";
  hdr << "ElementSpacing = " << format_double(geo.spacing[0]) << " "
      << format_double(geo.spacing[1]) << " " << format_double(geo.spacing[2]) << "\n";
  hdr << "Offset = " << format_double(geo.origin[0]) << " " << format_double(geo.origin[1])
      << " " << format_double(geo.origin[2]) << "\n";
  hdr << "ElementType = " << element_type << "\n";
  hdr << "ElementDataFile = " << rp.filename().string() << "\n";
  if (!hdr) throw IoError("failed writing MetaImage header: " + path);
  hdr.close();

  std::ofstream raw(rp, std::ios::binary);
  if (!raw) throw IoError("cannot write MetaImage data file: " + rp.string());
  raw.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!raw) throw IoError("failed writing MetaImage data file: " + rp.string());
}

}  // namespace

MhdContent load_mhd(const std::string& path) {
  const MhdHeader h = parse_mhd_header(path);
  if (h.element_type == "MET_SHORT") return load_hu_from(path, h);
  if (h.element_type == "MET_UCHAR") return load_mask_from(path, h);
  throw FormatError("unsupported ElementType " + h.element_type + ": " + path);
}

HuVolume load_hu_mhd(const std::string& path) {
  return load_hu_from(path, parse_mhd_header(path));
}

Mask3 load_mask_mhd(const std::string& path) {
  return load_mask_from(path, parse_mhd_header(path));
}

SoftMask3 load_float_mhd(const std::string& path) {
  const MhdHeader h = parse_mhd_header(path);
  if (h.element_type != "MET_FLOAT") {
    throw FormatError("expected MET_FLOAT, got " + h.element_type + ": " + path);
  }
  auto buf = read_payload(path, h, 4);
  if (h.msb) byteswap(buf.data(), h.geo.voxel_count(), 4);
  SoftMask3 m{h.geo, std::vector<float>(h.geo.voxel_count())};
  std::memcpy(m.values.data(), buf.data(), buf.size());
  return m;
}

void save_mhd(const HuVolume& v, const std::string& path) {
  write_mhd_pair(v.geo, "MET_SHORT", v.values.data(), v.values.size() * 2, path);
}

void save_mhd(const Mask3& m, const std::string& path) {
  write_mhd_pair(m.geo, "MET_UCHAR", m.values.data(), m.values.size(), path);
}

void save_mhd(const SoftMask3& m, const std::string& path) {
  write_mhd_pair(m.geo, "MET_FLOAT", m.values.data(), m.values.size() * 4, path);
}

void save_mhd(const NormVolume& v, const std::string& path) {
  write_mhd_pair(v.geo, "MET_FLOAT", v.values.data(), v.values.size() * 4, path);
}

// --- Resampling --------------------------------------------------------------

namespace {

// Trilinear sample at a continuous index, edge-clamped into [0, dims-1].
double sample_clamped(const HuVolume& v, double ux, double uy, double uz) {
  const auto& d = v.geo.dims;
  ux = std::clamp(ux, 0.0, static_cast<double>(d[0] - 1));
  uy = std::clamp(uy, 0.0, static_cast<double>(d[1] - 1));
  uz = std::clamp(uz, 0.0, static_cast<double>(d[2] - 1));
  const int x0 = static_cast<int>(ux), y0 = static_cast<int>(uy), z0 = static_cast<int>(uz);
  const int x1 = std::min(x0 + 1, d[0] - 1);
  const int y1 = std::min(y0 + 1, d[1] - 1);
  const int z1 = std::min(z0 + 1, d[2] - 1);
  const double fx = ux - x0, fy = uy - y0, fz = uz - z0;

  auto g = [&](int x, int y, int z) { return static_cast<double>(v.at(x, y, z)); };
  const double c00 = g(x0, y0, z0) * (1 - fx) + g(x1, y0, z0) * fx;
  const double c10 = g(x0, y1, z0) * (1 - fx) + g(x1, y1, z0) * fx;
  const double c01 = g(x0, y0, z1) * (1 - fx) + g(x1, y0, z1) * fx;
  const double c11 = g(x0, y1, z1) * (1 - fx) + g(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

std::int16_t to_hu(double v) {
  return static_cast<std::int16_t>(
      std::clamp<long>(std::lround(v), kHuMin, kHuMax));
}

std::array<int, 3> resampled_dims(const Geometry& geo, const std::array<double, 3>& target) {
  std::array<int, 3> out;
  for (int a = 0; a < 3; ++a) {
    out[a] = std::max(1, round_half_up(geo.dims[a] * geo.spacing[a] / target[a]));
  }
  return out;
}

// True when the source continuous index lies within the physical extent of the
// source grid (voxels as boxes: [-0.5, N-0.5] per axis).
bool in_extent(const Geometry& g, double ux, double uy, double uz) {
  return ux >= -0.5 && uy >= -0.5 && uz >= -0.5 && ux <= g.dims[0] - 0.5 &&
         uy <= g.dims[1] - 0.5 && uz <= g.dims[2] - 0.5;
}

}  // namespace

HuVolume resample(const HuVolume& v, const std::array<double, 3>& target_spacing) {
  for (double s : target_spacing) {
    if (s <= 0) throw ParamError("resample: target spacing must be positive");
  }
  Geometry out_geo;
  out_geo.dims = resampled_dims(v.geo, target_spacing);
  out_geo.spacing = target_spacing;
  out_geo.origin = v.geo.origin;

  // Exact copy when the grid is unchanged.
  if (out_geo.same_grid(v.geo, kGridTol)) return v;

  HuVolume out = make_hu_volume(out_geo);
  const double rx = target_spacing[0] / v.geo.spacing[0];
  const double ry = target_spacing[1] / v.geo.spacing[1];
  const double rz = target_spacing[2] / v.geo.spacing[2];
  for (int z = 0; z < out_geo.dims[2]; ++z) {
    for (int y = 0; y < out_geo.dims[1]; ++y) {
      for (int x = 0; x < out_geo.dims[0]; ++x) {
        out.at(x, y, z) = to_hu(sample_clamped(v, x * rx, y * ry, z * rz));
      }
    }
  }
  return out;
}

Mask3 resample_mask(const Mask3& m, const std::array<double, 3>& target_spacing) {
  for (double s : target_spacing) {
    if (s <= 0) throw ParamError("resample_mask: target spacing must be positive");
  }
  Geometry out_geo;
  out_geo.dims = resampled_dims(m.geo, target_spacing);
  out_geo.spacing = target_spacing;
  out_geo.origin = m.geo.origin;
  if (out_geo.same_grid(m.geo, kGridTol)) return m;

  Mask3 out = make_mask(out_geo);
  for (int z = 0; z < out_geo.dims[2]; ++z) {
    const int sz = std::clamp(round_half_up(z * target_spacing[2] / m.geo.spacing[2]), 0,
                              m.geo.dims[2] - 1);
    for (int y = 0; y < out_geo.dims[1]; ++y) {
      const int sy = std::clamp(round_half_up(y * target_spacing[1] / m.geo.spacing[1]), 0,
                                m.geo.dims[1] - 1);
      for (int x = 0; x < out_geo.dims[0]; ++x) {
        const int sx = std::clamp(round_half_up(x * target_spacing[0] / m.geo.spacing[0]), 0,
                                  m.geo.dims[0] - 1);
        out.at(x, y, z) = m.at(sx, sy, sz);
      }
    }
  }
  return out;
}

HuVolume resample_to_geometry(const HuVolume& v, const Geometry& target) {
  HuVolume out = make_hu_volume(target, kHuAir);
  for (int z = 0; z < target.dims[2]; ++z) {
    const double wz = target.origin[2] + z * target.spacing[2];
    const double uz = (wz - v.geo.origin[2]) / v.geo.spacing[2];
    for (int y = 0; y < target.dims[1]; ++y) {
      const double wy = target.origin[1] + y * target.spacing[1];
      const double uy = (wy - v.geo.origin[1]) / v.geo.spacing[1];
      for (int x = 0; x < target.dims[0]; ++x) {
        const double wx = target.origin[0] + x * target.spacing[0];
        const double ux = (wx - v.geo.origin[0]) / v.geo.spacing[0];
        if (in_extent(v.geo, ux, uy, uz)) {
          out.at(x, y, z) = to_hu(sample_clamped(v, ux, uy, uz));
        }
      }
    }
  }
  return out;
}

namespace {

template <typename T, typename Grid>
T nearest_or(const Grid& g, double ux, double uy, double uz, T fallback) {
  const int x = round_half_up(ux), y = round_half_up(uy), z = round_half_up(uz);
  if (!g.geo.contains(x, y, z)) return fallback;
  return g.at(x, y, z);
}

}  // namespace

Mask3 resample_mask_to_geometry(const Mask3& m, const Geometry& target) {
  Mask3 out = make_mask(target);
  for (int z = 0; z < target.dims[2]; ++z) {
    const double uz = (target.origin[2] + z * target.spacing[2] - m.geo.origin[2]) / m.geo.spacing[2];
    for (int y = 0; y < target.dims[1]; ++y) {
      const double uy = (target.origin[1] + y * target.spacing[1] - m.geo.origin[1]) / m.geo.spacing[1];
      for (int x = 0; x < target.dims[0]; ++x) {
        const double ux = (target.origin[0] + x * target.spacing[0] - m.geo.origin[0]) / m.geo.spacing[0];
        out.at(x, y, z) = nearest_or<std::uint8_t>(m, ux, uy, uz, 0);
      }
    }
  }
  return out;
}

SoftMask3 resample_soft_to_geometry(const SoftMask3& m, const Geometry& target) {
  SoftMask3 out = make_soft_mask(target, 0.0f);
  for (int z = 0; z < target.dims[2]; ++z) {
    const double uz = (target.origin[2] + z * target.spacing[2] - m.geo.origin[2]) / m.geo.spacing[2];
    for (int y = 0; y < target.dims[1]; ++y) {
      const double uy = (target.origin[1] + y * target.spacing[1] - m.geo.origin[1]) / m.geo.spacing[1];
      for (int x = 0; x < target.dims[0]; ++x) {
        const double ux = (target.origin[0] + x * target.spacing[0] - m.geo.origin[0]) / m.geo.spacing[0];
        if (!in_extent(m.geo, ux, uy, uz)) continue;
        const double cx = std::clamp(ux, 0.0, static_cast<double>(m.geo.dims[0] - 1));
        const double cy = std::clamp(uy, 0.0, static_cast<double>(m.geo.dims[1] - 1));
        const double cz = std::clamp(uz, 0.0, static_cast<double>(m.geo.dims[2] - 1));
        const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy), z0 = static_cast<int>(cz);
        const int x1 = std::min(x0 + 1, m.geo.dims[0] - 1);
        const int y1 = std::min(y0 + 1, m.geo.dims[1] - 1);
        const int z1 = std::min(z0 + 1, m.geo.dims[2] - 1);
        const double fx = cx - x0, fy = cy - y0, fz = cz - z0;
        const double c00 = m.at(x0, y0, z0) * (1 - fx) + m.at(x1, y0, z0) * fx;
        const double c10 = m.at(x0, y1, z0) * (1 - fx) + m.at(x1, y1, z0) * fx;
        const double c01 = m.at(x0, y0, z1) * (1 - fx) + m.at(x1, y0, z1) * fx;
        const double c11 = m.at(x0, y1, z1) * (1 - fx) + m.at(x1, y1, z1) * fx;
        out.at(x, y, z) =
            static_cast<float>((c00 * (1 - fy) + c10 * fy) * (1 - fz) +
                               (c01 * (1 - fy) + c11 * fy) * fz);
      }
    }
  }
  return out;
}

// --- Windowing ---------------------------------------------------------------

double normalize_value(double hu, const Window& w, RangeTag tag) {
  if (tag == RangeTag::SYM) {
    return std::clamp(2.0 * (hu - w.level) / w.width, -1.0, 1.0);
  }
  return std::clamp((hu - w.level) / w.width + 0.5, 0.0, 1.0);
}

double denormalize_value(double norm, const Window& w, RangeTag tag) {
  if (tag == RangeTag::SYM) return w.level + norm * w.width / 2.0;
  return w.level + (norm - 0.5) * w.width;
}

NormVolume normalize_window(const HuVolume& v, double level, double width, RangeTag tag) {
  if (width <= 0) throw ParamError("normalize_window: width must be positive");
  NormVolume out{v.geo, std::vector<float>(v.values.size()), tag, Window{level, width}};
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    out.values[i] = static_cast<float>(normalize_value(v.values[i], out.window, tag));
  }
  return out;
}

NormVolume normalize_window(const HuVolume& v, const Window& w, RangeTag tag) {
  return normalize_window(v, w.level, w.width, tag);
}

HuVolume denormalize_window(const NormVolume& v) {
  HuVolume out{v.geo, std::vector<std::int16_t>(v.values.size())};
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    out.values[i] = to_hu(denormalize_value(v.values[i], v.window, v.tag));
  }
  return out;
}

// --- Preprocessing presets -----------------------------------------------------

HuVolume crop_or_pad(const HuVolume& v, const std::array<int, 3>& target_dims,
                     const std::array<double, 3>& center_voxel) {
  Geometry out_geo = v.geo;
  std::array<int, 3> start{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    if (target_dims[a] <= 0) continue;
    const double c = center_voxel[a] < 0 ? (v.geo.dims[a] - 1) / 2.0 : center_voxel[a];
    start[a] = round_half_up(c - (target_dims[a] - 1) / 2.0);
    out_geo.dims[a] = target_dims[a];
    out_geo.origin[a] = v.geo.origin[a] + start[a] * v.geo.spacing[a];
  }
  HuVolume out = make_hu_volume(out_geo, kHuAir);
  for (int z = 0; z < out_geo.dims[2]; ++z) {
    const int sz = z + start[2];
    for (int y = 0; y < out_geo.dims[1]; ++y) {
      const int sy = y + start[1];
      for (int x = 0; x < out_geo.dims[0]; ++x) {
        const int sx = x + start[0];
        if (v.geo.contains(sx, sy, sz)) out.at(x, y, z) = v.at(sx, sy, sz);
      }
    }
  }
  return out;
}

Mask3 crop_or_pad_mask(const Mask3& m, const std::array<int, 3>& target_dims,
                       const std::array<double, 3>& center_voxel) {
  Geometry out_geo = m.geo;
  std::array<int, 3> start{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    if (target_dims[a] <= 0) continue;
    const double c = center_voxel[a] < 0 ? (m.geo.dims[a] - 1) / 2.0 : center_voxel[a];
    start[a] = round_half_up(c - (target_dims[a] - 1) / 2.0);
    out_geo.dims[a] = target_dims[a];
    out_geo.origin[a] = m.geo.origin[a] + start[a] * m.geo.spacing[a];
  }
  Mask3 out = make_mask(out_geo);
  for (int z = 0; z < out_geo.dims[2]; ++z) {
    const int sz = z + start[2];
    for (int y = 0; y < out_geo.dims[1]; ++y) {
      const int sy = y + start[1];
      for (int x = 0; x < out_geo.dims[0]; ++x) {
        const int sx = x + start[0];
        if (m.geo.contains(sx, sy, sz)) out.at(x, y, z) = m.at(sx, sy, sz);
      }
    }
  }
  return out;
}

NormVolume apply_preset(const HuVolume& v, const PreprocessPreset& preset,
                        const std::array<double, 3>& center_voxel) {
  std::array<double, 3> spacing;
  for (int a = 0; a < 3; ++a) {
    spacing[a] = preset.spacing[a] > 0 ? preset.spacing[a] : v.geo.spacing[a];
  }
  HuVolume r = resample(v, spacing);
  // Map the requested center from input voxel coordinates to the resampled grid.
  std::array<double, 3> center;
  for (int a = 0; a < 3; ++a) {
    center[a] = center_voxel[a] < 0 ? -1.0 : center_voxel[a] * v.geo.spacing[a] / spacing[a];
  }
  r = crop_or_pad(r, preset.crop_dims, center);
  return normalize_window(r, preset.window, preset.tag);
}

// --- Mask utilities -------------------------------------------------------------

std::pair<std::vector<std::int32_t>, int> label_components(const Mask3& m) {
  const auto n = m.geo.voxel_count();
  std::vector<std::int32_t> labels(n, 0);
  int next = 0;
  std::vector<std::size_t> stack;
  const auto& d = m.geo.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = m.geo.index(x, y, z);
        if (!m.values[i] || labels[i]) continue;
        ++next;
        labels[i] = next;
        stack.assign(1, i);
        while (!stack.empty()) {
          const std::size_t cur = stack.back();
          stack.pop_back();
          const int cz = static_cast<int>(cur / (static_cast<std::size_t>(d[0]) * d[1]));
          const int rem = static_cast<int>(cur % (static_cast<std::size_t>(d[0]) * d[1]));
          const int cy = rem / d[0];
          const int cx = rem % d[0];
          constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                     {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& o : off) {
            const int nx = cx + o[0], ny = cy + o[1], nz = cz + o[2];
            if (!m.geo.contains(nx, ny, nz)) continue;
            const std::size_t j = m.geo.index(nx, ny, nz);
            if (m.values[j] && !labels[j]) {
              labels[j] = next;
              stack.push_back(j);
            }
          }
        }
      }
    }
  }
  return {std::move(labels), next};
}

std::array<double, 3> mask_centroid(const Mask3& m) {
  double sx = 0, sy = 0, sz = 0;
  std::size_t n = 0;
  const auto& d = m.geo.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (m.at(x, y, z)) {
          sx += x;
          sy += y;
          sz += z;
          ++n;
        }
      }
    }
  }
  if (n == 0) throw DataError("mask_centroid: empty mask");
  return {sx / n, sy / n, sz / n};
}

// --- Validators -----------------------------------------------------------------

namespace {

void check_geometry(const Geometry& g) {
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] < 1) throw DataError("validate: non-positive dims");
    if (g.spacing[a] <= 0) throw DataError("validate: non-positive spacing");
    if (!std::isfinite(g.origin[a])) throw DataError("validate: non-finite origin");
  }
}

}  // namespace

void validate(const HuVolume& v) {
  check_geometry(v.geo);
  if (v.values.size() != v.geo.voxel_count()) throw DataError("validate: size mismatch");
  for (auto s : v.values) {
    if (s < kHuMin || s > kHuMax) throw DataError("validate: HU out of [-1024, 3071]");
  }
}

void validate(const NormVolume& v) {
  check_geometry(v.geo);
  if (v.values.size() != v.geo.voxel_count()) throw DataError("validate: size mismatch");
  if (v.window.width <= 0) throw DataError("validate: non-positive window width");
  const float lo = v.tag == RangeTag::SYM ? -1.0f : 0.0f;
  for (auto s : v.values) {
    if (!(s >= lo && s <= 1.0f)) throw DataError("validate: normalized value out of range");
  }
}

void validate(const Mask3& m) {
  check_geometry(m.geo);
  if (m.values.size() != m.geo.voxel_count()) throw DataError("validate: size mismatch");
  for (auto s : m.values) {
    if (s > 1) throw DataError("validate: mask value not in {0,1}");
  }
}

void validate(const SoftMask3& m) {
  check_geometry(m.geo);
  if (m.values.size() != m.geo.voxel_count()) throw DataError("validate: size mismatch");
  for (auto s : m.values) {
    if (!(s >= 0.0f && s <= 1.0f)) throw DataError("validate: soft value out of [0,1]");
  }
}

}  // namespace ctsynth
