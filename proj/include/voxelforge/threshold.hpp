#pragma once

#include <limits>

#include "voxelforge/grid.hpp"

namespace vf {

/// One end of a threshold interval. Infinite values leave that end open.
struct Bound {
  double value;
  bool inclusive = true;

  static Bound open_low() { return {-std::numeric_limits<double>::infinity(), true}; }
  static Bound open_high() { return {std::numeric_limits<double>::infinity(), true}; }
};

/// Mask of voxels with lo <= v <= hi (or strict, per bound).
template <class T>
Mask threshold(const Grid<T>& volume, Bound lo, Bound hi) {
  if (lo.value > hi.value) throw InvalidArgument("threshold: lo > hi");
  Mask out(volume.dims(), volume.spacing());
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const double v = static_cast<double>(volume[i]);
    const bool above = lo.inclusive ? v >= lo.value : v > lo.value;
    const bool below = hi.inclusive ? v <= hi.value : v < hi.value;
    out[i] = (above && below) ? 1 : 0;
  }
  return out;
}

template <class T>
Mask threshold(const Grid<T>& volume, double lo, double hi) {
  return threshold(volume, Bound{lo, true}, Bound{hi, true});
}

}  // namespace vf
