#pragma once

// Volume file formats.
//
// VGRID: `<name>.vgrid.json` sidecar plus `<name>.vgrid.raw` payload, little-endian, x-fastest.
// NIfTI-1: read/write of the single-file `.nii` subset (uint8, int16, float32), plus reading
// `ni1` header/image pairs. Orientation fields are ignored.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxelforge/grid.hpp"

namespace vf {

using AnyGrid = std::variant<Grid<float>, Grid<std::int16_t>, Grid<std::uint8_t>>;

enum class FileFormat { vgrid, nifti };

namespace io_detail {

template <class T>
T byteswap_value(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <class T>
void to_little_endian(std::vector<T>& v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1)
    for (auto& x : v) x = byteswap_value(x);
}

inline std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + p.string() + "'");
  return buf;
}

inline void spill(const std::filesystem::path& p, const char* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  out.write(data, static_cast<std::streamsize>(n));
  out.flush();
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <class T>
Grid<T> grid_from_bytes(Dims dims, Spacing sp, const char* bytes, std::size_t nbytes) {
  if (nbytes != dims.count() * sizeof(T))
    throw FormatError("payload has " + std::to_string(nbytes) + " bytes, header implies " +
                      std::to_string(dims.count() * sizeof(T)));
  std::vector<T> data(dims.count());
  std::memcpy(data.data(), bytes, nbytes);
  to_little_endian(data);
  return Grid<T>(dims, sp, std::move(data));
}

// Returns the raw payload path paired with a `.vgrid.json` sidecar.
inline std::filesystem::path vgrid_raw_path(const std::filesystem::path& sidecar) {
  std::string s = sidecar.string();
  if (!ends_with(s, ".vgrid.json")) throw InvalidArgument("VGRID sidecar must end in .vgrid.json: " + s);
  return s.substr(0, s.size() - 5) + ".raw";
}

inline AnyGrid read_vgrid(const std::filesystem::path& sidecar) {
  nlohmann::json j;
  {
    std::ifstream in(sidecar);
    if (!in) throw IoError("cannot open '" + sidecar.string() + "'");
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed VGRID sidecar: " + std::string(e.what()));
    }
  }
  Dims dims;
  Spacing sp;
  Dtype dtype;
  try {
    auto d = j.at("dims");
    auto s = j.at("spacing_mm");
    if (d.size() != 3 || s.size() != 3) throw FormatError("dims and spacing_mm need 3 entries");
    for (int a = 0; a < 3; ++a) {
      long long v = d[a].get<long long>();
      if (v <= 0) throw FormatError("dims must be positive");
      dims[a] = static_cast<std::size_t>(v);
      sp[a] = s[a].get<double>();
      if (!(sp[a] > 0.0) || !std::isfinite(sp[a])) throw FormatError("spacing must be positive");
    }
    dtype = parse_dtype(j.at("dtype").get<std::string>());
    if (j.value("order", "x-fastest") != "x-fastest") throw FormatError("only x-fastest order supported");
    if (j.value("endianness", "little") != "little") throw FormatError("only little endian supported");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed VGRID sidecar: " + std::string(e.what()));
  }
  auto raw = slurp(vgrid_raw_path(sidecar));
  switch (dtype) {
    case Dtype::float32: return grid_from_bytes<float>(dims, sp, raw.data(), raw.size());
    case Dtype::int16: return grid_from_bytes<std::int16_t>(dims, sp, raw.data(), raw.size());
    case Dtype::uint8: return grid_from_bytes<std::uint8_t>(dims, sp, raw.data(), raw.size());
  }
  throw FormatError("unreachable dtype");
}

template <class T>
void write_vgrid(const Grid<T>& g, const std::filesystem::path& sidecar) {
  nlohmann::json j;
  j["dims"] = {g.dims().x, g.dims().y, g.dims().z};
  j["spacing_mm"] = {g.spacing().x, g.spacing().y, g.spacing().z};
  j["dtype"] = to_string(dtype_of<T>());
  j["order"] = "x-fastest";
  j["endianness"] = "little";
  auto raw = vgrid_raw_path(sidecar);
  std::vector<T> data = g.storage();
  to_little_endian(data);
  spill(raw, reinterpret_cast<const char*>(data.data()), data.size() * sizeof(T));
  std::string text = j.dump(2) + "\n";
  spill(sidecar, text.data(), text.size());
}

// NIfTI-1 header field offsets.
inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kOffDim = 40;
inline constexpr std::size_t kOffDatatype = 70;
inline constexpr std::size_t kOffBitpix = 72;
inline constexpr std::size_t kOffPixdim = 76;
inline constexpr std::size_t kOffVoxOffset = 108;
inline constexpr std::size_t kOffSclSlope = 112;
inline constexpr std::size_t kOffSclInter = 116;
inline constexpr std::size_t kOffMagic = 344;

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  return v;
}

template <class T>
void store_le(char* p, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  std::memcpy(p, &v, sizeof(T));
}

inline AnyGrid read_nifti(const std::filesystem::path& path) {
  auto buf = slurp(path);
  if (buf.size() < kNiftiHeaderSize) throw FormatError("NIfTI file shorter than its header");
  const char* h = buf.data();
  const auto sizeof_hdr = load_le<std::int32_t>(h);
  if (sizeof_hdr != 348) {
    if (byteswap_value(sizeof_hdr) == 348) throw FormatError("big-endian NIfTI is not supported");
    throw FormatError("bad NIfTI sizeof_hdr");
  }
  const bool single = std::memcmp(h + kOffMagic, "n+1\0", 4) == 0;
  const bool paired = std::memcmp(h + kOffMagic, "ni1\0", 4) == 0;
  if (!single && !paired) throw FormatError("bad NIfTI magic");

  const auto ndim = load_le<std::int16_t>(h + kOffDim);
  if (ndim < 1 || ndim > 7) throw FormatError("bad NIfTI dim[0]");
  Dims dims;
  for (int a = 0; a < 7; ++a) {
    auto d = load_le<std::int16_t>(h + kOffDim + 2 * (a + 1));
    if (a < ndim) {
      if (d <= 0) throw FormatError("NIfTI dims must be positive");
      if (a < 3) dims[a] = static_cast<std::size_t>(d);
      else if (d != 1) throw FormatError("only 3D NIfTI volumes are supported");
    }
  }
  Spacing sp;
  for (int a = 0; a < 3; ++a) {
    float px = a < ndim ? load_le<float>(h + kOffPixdim + 4 * (a + 1)) : 1.0f;
    sp[a] = std::fabs(static_cast<double>(px));
    if (!(sp[a] > 0.0) || !std::isfinite(sp[a])) sp[a] = 1.0;
  }
  const auto datatype = load_le<std::int16_t>(h + kOffDatatype);
  const auto slope = load_le<float>(h + kOffSclSlope);
  const auto inter = load_le<float>(h + kOffSclInter);
  auto vox_offset = static_cast<std::size_t>(load_le<float>(h + kOffVoxOffset));

  std::vector<char> img;
  const char* payload;
  std::size_t avail;
  if (single) {
    if (vox_offset < kNiftiHeaderSize) vox_offset = 352;
    if (vox_offset > buf.size()) throw FormatError("NIfTI vox_offset past end of file");
    payload = buf.data() + vox_offset;
    avail = buf.size() - vox_offset;
  } else {
    auto img_path = path;
    img_path.replace_extension(".img");
    img = slurp(img_path);
    if (vox_offset > img.size()) throw FormatError("NIfTI vox_offset past end of image file");
    payload = img.data() + vox_offset;
    avail = img.size() - vox_offset;
  }

  auto take = [&](std::size_t elem) {
    std::size_t need = dims.count() * elem;
    if (avail < need) throw FormatError("NIfTI payload shorter than header implies");
    return need;
  };
  AnyGrid out;
  switch (datatype) {
    case 2: out = grid_from_bytes<std::uint8_t>(dims, sp, payload, take(1)); break;
    case 4: out = grid_from_bytes<std::int16_t>(dims, sp, payload, take(2)); break;
    case 16: out = grid_from_bytes<float>(dims, sp, payload, take(4)); break;
    default: throw FormatError("unsupported NIfTI datatype " + std::to_string(datatype));
  }
  if (slope != 0.0f && !(slope == 1.0f && inter == 0.0f)) {
    return std::visit(
        [&](const auto& g) -> AnyGrid {
          Grid<float> f(g.dims(), g.spacing());
          for (std::size_t i = 0; i < g.size(); ++i)
            f[i] = static_cast<float>(static_cast<double>(g[i]) * slope + inter);
          return f;
        },
        out);
  }
  return out;
}

template <class T>
void write_nifti(const Grid<T>& g, const std::filesystem::path& path) {
  for (int a = 0; a < 3; ++a)
    if (g.dims()[a] > 32767) throw InvalidArgument("NIfTI-1 dims are limited to 32767");
  std::vector<char> buf(352 + g.size() * sizeof(T), 0);
  char* h = buf.data();
  store_le<std::int32_t>(h, 348);
  store_le<std::int16_t>(h + kOffDim, 3);
  for (int a = 0; a < 7; ++a)
    store_le<std::int16_t>(h + kOffDim + 2 * (a + 1), a < 3 ? static_cast<std::int16_t>(g.dims()[a]) : 1);
  std::int16_t code = dtype_of<T>() == Dtype::uint8 ? 2 : dtype_of<T>() == Dtype::int16 ? 4 : 16;
  store_le<std::int16_t>(h + kOffDatatype, code);
  store_le<std::int16_t>(h + kOffBitpix, static_cast<std::int16_t>(8 * sizeof(T)));
  store_le<float>(h + kOffPixdim, 1.0f);
  for (int a = 0; a < 3; ++a) store_le<float>(h + kOffPixdim + 4 * (a + 1), static_cast<float>(g.spacing()[a]));
  store_le<float>(h + kOffVoxOffset, 352.0f);
  store_le<float>(h + kOffSclSlope, 1.0f);
  std::memcpy(h + kOffMagic, "n+1\0", 4);
  std::vector<T> data = g.storage();
  to_little_endian(data);
  std::memcpy(buf.data() + 352, data.data(), data.size() * sizeof(T));
  spill(path, buf.data(), buf.size());
}

inline bool is_nifti_path(const std::filesystem::path& p) {
  auto s = p.string();
  return ends_with(s, ".nii") || ends_with(s, ".hdr");
}

}  // namespace io_detail

/// Reads a volume keeping its stored element type. Format is chosen by extension.
inline AnyGrid read_any(const std::filesystem::path& path) {
  if (io_detail::is_nifti_path(path)) return io_detail::read_nifti(path);
  return io_detail::read_vgrid(path);
}

/// Reads a volume and converts it to element type T without rescaling.
template <class T = float>
Grid<T> read_volume(const std::filesystem::path& path) {
  return std::visit([](const auto& g) { return convert<T>(g); }, read_any(path));
}

template <class T>
void write_volume(const Grid<T>& g, const std::filesystem::path& path, FileFormat format) {
  if (auto parent = path.parent_path(); !parent.empty() && !std::filesystem::is_directory(parent))
    throw IoError("directory does not exist: " + parent.string());
  if (format == FileFormat::nifti) io_detail::write_nifti(g, path);
  else io_detail::write_vgrid(g, path);
}

/// Writes with the format implied by the extension (`.nii` or `.vgrid.json`).
template <class T>
void write_volume(const Grid<T>& g, const std::filesystem::path& path) {
  write_volume(g, path, io_detail::is_nifti_path(path) ? FileFormat::nifti : FileFormat::vgrid);
}

inline Dtype dtype_of(const AnyGrid& g) {
  return std::visit([](const auto& x) { return dtype_of<typename std::decay_t<decltype(x)>::value_type>(); }, g);
}

}  // namespace vf
