#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "voxelforge/grid.hpp"

namespace vf {

/// 6/26 are 3D neighbourhoods. 4/8 label each z-slice independently.
enum class Connectivity { c4 = 4, c6 = 6, c8 = 8, c26 = 26 };

inline Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 4: return Connectivity::c4;
    case 6: return Connectivity::c6;
    case 8: return Connectivity::c8;
    case 26: return Connectivity::c26;
    default: throw InvalidArgument("connectivity must be 4, 6, 8 or 26");
  }
}

struct Components {
  Grid<std::int32_t> ids;          ///< 0 = background, 1..K by decreasing size
  std::vector<std::size_t> sizes;  ///< sizes[k-1] is the voxel count of id k

  std::size_t count() const { return sizes.size(); }
};

namespace cc_detail {

struct Offset {
  int dx, dy, dz;
};

// Half of the neighbourhood: offsets that precede the centre in raster order.
inline std::vector<Offset> backward_offsets(Connectivity c) {
  std::vector<Offset> out;
  const bool planar = c == Connectivity::c4 || c == Connectivity::c8;
  for (int dz = planar ? 0 : -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int lin = dx + 3 * (dy + 3 * dz);
        if (lin >= 0) continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if ((c == Connectivity::c6 || c == Connectivity::c4) && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

inline std::uint32_t find(std::vector<std::uint32_t>& parent, std::uint32_t a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

inline void unite(std::vector<std::uint32_t>& parent, std::uint32_t a, std::uint32_t b) {
  a = find(parent, a);
  b = find(parent, b);
  if (a == b) return;
  // Keep the smaller index as root so roots carry the minimum linear index.
  if (a < b) parent[b] = a;
  else parent[a] = b;
}

}  // namespace cc_detail

/// Labels foreground components. Ids are ordered by decreasing voxel count, ties broken by
/// the smallest linear voxel index in the component.
inline Components connected_components(const Mask& mask, Connectivity conn) {
  using namespace cc_detail;
  const Dims d = mask.dims();
  const std::size_t n = mask.size();
  constexpr std::uint32_t kNone = 0xffffffffu;

  // Provisional labels: one per foreground voxel, merged with union-find.
  std::vector<std::uint32_t> prov(n, kNone);
  std::vector<std::uint32_t> parent;
  std::vector<std::uint32_t> first_index;
  const auto offs = backward_offsets(conn);

  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        const std::size_t i = mask.index(x, y, z);
        if (!mask[i]) continue;
        std::uint32_t label = kNone;
        for (const auto& o : offs) {
          const auto nx = static_cast<std::ptrdiff_t>(x) + o.dx;
          const auto ny = static_cast<std::ptrdiff_t>(y) + o.dy;
          const auto nz = static_cast<std::ptrdiff_t>(z) + o.dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<std::ptrdiff_t>(d.x) ||
              ny >= static_cast<std::ptrdiff_t>(d.y))
            continue;
          const std::uint32_t nl = prov[mask.index(nx, ny, nz)];
          if (nl == kNone) continue;
          if (label == kNone) label = nl;
          else unite(parent, label, nl);
        }
        if (label == kNone) {
          label = static_cast<std::uint32_t>(parent.size());
          parent.push_back(label);
          first_index.push_back(static_cast<std::uint32_t>(i));
        }
        prov[i] = label;
      }

  // Provisional labels are created in raster order, so the root (smallest label)
  // also holds the smallest linear index of its component.
  std::vector<std::size_t> root_size(parent.size(), 0);
  for (std::size_t i = 0; i < n; ++i)
    if (prov[i] != kNone) {
      prov[i] = find(parent, prov[i]);
      ++root_size[prov[i]];
    }
  std::vector<std::uint32_t> roots;
  for (std::uint32_t r = 0; r < parent.size(); ++r)
    if (parent[r] == r) roots.push_back(r);
  std::sort(roots.begin(), roots.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (root_size[a] != root_size[b]) return root_size[a] > root_size[b];
    return first_index[a] < first_index[b];
  });
  std::vector<std::int32_t> final_id(parent.size(), 0);
  Components out{Grid<std::int32_t>(d, mask.spacing(), 0), {}};
  out.sizes.reserve(roots.size());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    final_id[roots[k]] = static_cast<std::int32_t>(k + 1);
    out.sizes.push_back(root_size[roots[k]]);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (prov[i] != kNone) out.ids[i] = final_id[prov[i]];
  return out;
}

/// Union of the `count` largest components (all of them if fewer exist).
inline Mask largest_components(const Mask& mask, std::size_t count, Connectivity conn) {
  if (count < 1) throw InvalidArgument("largest_components: count must be >= 1");
  const auto cc = connected_components(mask, conn);
  Mask out(mask.dims(), mask.spacing());
  const auto keep = static_cast<std::int32_t>(std::min(count, cc.count()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (cc.ids[i] > 0 && cc.ids[i] <= keep) ? 1 : 0;
  return out;
}

/// Union of components of `mask` that share at least one voxel with `seeds`.
inline Mask components_touching(const Mask& mask, const Mask& seeds, Connectivity conn) {
  if (mask.dims() != seeds.dims()) throw InvalidArgument("components_touching: dims differ");
  const auto cc = connected_components(mask, conn);
  std::vector<std::uint8_t> hit(cc.count() + 1, 0);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (seeds[i] && cc.ids[i] > 0) hit[cc.ids[i]] = 1;
  Mask out(mask.dims(), mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = hit[cc.ids[i]] && cc.ids[i] > 0 ? 1 : 0;
  return out;
}

}  // namespace vf
