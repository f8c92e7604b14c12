#pragma once

#include "voxelforge/grid.hpp"
#include "voxelforge/parallel.hpp"
#include "voxelforge/random.hpp"

namespace vf {

/// IID Gaussian field; voxel i holds sigma * normal_at(seed, i). Independent of thread count.
inline Volume generate_noise(const Dims& dims, double sigma, std::uint64_t seed, unsigned threads = 0,
                             const Spacing& spacing = {}) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  Volume out(dims, spacing, 0.0f);
  if (sigma == 0.0) return out;
  parallel_for(
      out.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = static_cast<float>(sigma * normal_at(seed, i));
      },
      threads);
  return out;
}

}  // namespace vf
