#pragma once

#include <array>
#include <vector>

#include "voxelforge/grid.hpp"

namespace vf {

/// Sub-regions covering a volume for tiled inference. Overlapping predictions are averaged.
struct TileCover {
  Dims tile;
  std::vector<std::array<std::size_t, 3>> offsets;
  bool clamped = false;  ///< requested tile was larger than the volume on some axis
};

/// Offsets along one axis: 0, s, 2s, ... with stride s = tile, plus a final tile abutting the end.
inline std::vector<std::size_t> tile_offsets_1d(std::size_t dim, std::size_t tile) {
  if (dim == 0 || tile == 0) throw InvalidArgument("tile_offsets_1d: sizes must be positive");
  tile = std::min(tile, dim);
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + tile <= dim; o += tile) out.push_back(o);
  if (out.back() + tile < dim) out.push_back(dim - tile);
  return out;
}

inline TileCover make_tile_cover(const Dims& dims, const Dims& tile) {
  TileCover c;
  for (int a = 0; a < 3; ++a) {
    if (tile[a] == 0) throw InvalidArgument("make_tile_cover: tile dims must be positive");
    c.tile[a] = std::min(tile[a], dims[a]);
    c.clamped = c.clamped || tile[a] > dims[a];
  }
  const auto ox = tile_offsets_1d(dims.x, c.tile.x);
  const auto oy = tile_offsets_1d(dims.y, c.tile.y);
  const auto oz = tile_offsets_1d(dims.z, c.tile.z);
  for (auto z : oz)
    for (auto y : oy)
      for (auto x : ox) c.offsets.push_back({x, y, z});
  return c;
}

/// Averages per-tile predictions back into a full-size volume.
/// `tiles[i]` must have dims `cover.tile` and corresponds to `cover.offsets[i]`.
inline Volume average_tiles(const TileCover& cover, const std::vector<Volume>& tiles, const Dims& dims,
                            const Spacing& spacing) {
  if (tiles.size() != cover.offsets.size()) throw InvalidArgument("average_tiles: tile count mismatch");
  std::vector<double> sum(dims.count(), 0.0);
  std::vector<std::uint32_t> hits(dims.count(), 0);
  Volume out(dims, spacing);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& tv = tiles[t];
    if (tv.dims() != cover.tile) throw InvalidArgument("average_tiles: tile has wrong dims");
    const auto& o = cover.offsets[t];
    for (std::size_t z = 0; z < cover.tile.z; ++z)
      for (std::size_t y = 0; y < cover.tile.y; ++y)
        for (std::size_t x = 0; x < cover.tile.x; ++x) {
          const std::size_t i = out.index(o[0] + x, o[1] + y, o[2] + z);
          sum[i] += tv(x, y, z);
          ++hits[i];
        }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hits[i] ? static_cast<float>(sum[i] / hits[i]) : 0.0f;
  return out;
}

}  // namespace vf
