#pragma once

// Unsupervised CT labelers for the lungs and the skeleton, built from thresholding,
// FFT morphology and connected-component selection.

#include "voxelforge/components.hpp"
#include "voxelforge/fftmorph.hpp"
#include "voxelforge/grid.hpp"
#include "voxelforge/threshold.hpp"

namespace vf {

struct LungParams {
  double air_hu_max = -150.0;         ///< air keeps v <= air_hu_max
  double erosion_diameter_mm = 10.0;  ///< ball used to cut thin air channels
  std::size_t n_lungs = 2;

  void validate() const {
    if (!(erosion_diameter_mm > 0.0)) throw InvalidArgument("erosion diameter must be positive");
    if (n_lungs < 1) throw InvalidArgument("n_lungs must be >= 1");
  }
};

struct BoneParams {
  double tau1 = 0.0;                  ///< bone tissue retention threshold, keeps v >= tau1
  double tau2 = 200.0;                ///< hard bone exterior threshold, keeps v >= tau2
  double closing_diameter_mm = 25.0;
  /// Connectivity of the "largest component is the skeleton" step. 26 tolerates thin
  /// joint gaps that would split the skeleton under face connectivity.
  Connectivity skeleton_connectivity = Connectivity::c26;

  void validate() const {
    if (!(tau1 < tau2)) throw InvalidArgument("bone thresholds need tau1 < tau2");
    if (!(closing_diameter_mm > 0.0)) throw InvalidArgument("closing diameter must be positive");
  }
};

namespace label_detail {

/// Component ids (under `conn`) that touch the x or y faces of the volume.
inline std::vector<std::uint8_t> xy_border_ids(const Components& cc) {
  const Dims d = cc.ids.dims();
  std::vector<std::uint8_t> touch(cc.count() + 1, 0);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        if (x != 0 && x != d.x - 1 && y != 0 && y != d.y - 1) continue;
        touch[cc.ids(x, y, z)] = 1;
      }
  touch[0] = 0;
  return touch;
}

}  // namespace label_detail

/// Drops 3D face-connected components touching the min/max x or y face. The z faces do not
/// count: the patient continues beyond the scanned slab.
inline Mask remove_boundary_connected(const Mask& mask) {
  const auto cc = connected_components(mask, Connectivity::c6);
  const auto touch = label_detail::xy_border_ids(cc);
  Mask out(mask.dims(), mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (cc.ids[i] > 0 && !touch[cc.ids[i]]) ? 1 : 0;
  return out;
}

/// Per axial slice, sets background regions (4-connected) that do not reach the slice border.
inline Mask fill_slice_holes(const Mask& mask) {
  const auto cc = connected_components(complement(mask), Connectivity::c4);
  const auto touch = label_detail::xy_border_ids(cc);
  Mask out = mask;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (cc.ids[i] > 0 && !touch[cc.ids[i]]) out[i] = 1;
  return out;
}

/// Lungs as the largest interior air pockets.
///  1. air = v <= air_hu_max
///  2. erode air with a ball to disconnect small pockets and thin channels; the volume is
///     edge-extended so exterior air stays attached to the faces it touches
///  3. drop pockets touching the x/y boundary (air outside the body)
///  4. keep the n_lungs largest remaining pockets
///  5. undo the erosion: return the air components touching those pockets
template <class T>
Mask label_lungs(const Grid<T>& ct, const LungParams& p = {}) {
  p.validate();
  const Mask air = threshold(ct, Bound::open_low(), Bound{p.air_hu_max, true});
  const Mask eroded = erode_edge_extended(air, ball_element(p.erosion_diameter_mm, ct.spacing()));
  const Mask interior = remove_boundary_connected(eroded);
  const auto cc = connected_components(interior, Connectivity::c6);
  if (cc.count() == 0) throw NoCandidate("no interior air pocket survived erosion");
  const Mask lungs = largest_components(interior, p.n_lungs, Connectivity::c6);
  return components_touching(air, lungs, Connectivity::c6);
}

/// Skeleton as the largest bright structure, closed and restricted to bone-like intensities.
///  1. exterior = v >= tau2
///  2. keep its largest component
///  3. close with a ball to bridge gaps in the exterior
///  4. intersect with v >= tau1 to drop soft tissue pulled in by the closing
///  5. fill per-slice holes (marrow of large bones)
template <class T>
Mask label_bones(const Grid<T>& ct, const BoneParams& p = {}) {
  p.validate();
  const Mask exterior = threshold(ct, Bound{p.tau2, true}, Bound::open_high());
  if (count_nonzero(exterior) == 0) throw NoCandidate("no voxel at or above tau2");
  const Mask skeleton = largest_components(exterior, 1, p.skeleton_connectivity);
  const Mask closed = close(skeleton, ball_element(p.closing_diameter_mm, ct.spacing()));
  const Mask retained = mask_and(closed, threshold(ct, Bound{p.tau1, true}, Bound::open_high()));
  return fill_slice_holes(retained);
}

}  // namespace vf
