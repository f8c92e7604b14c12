#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "voxelforge/grid.hpp"
#include "voxelforge/parallel.hpp"

namespace vf {

enum class Interpolation { trilinear, nearest };

/// Anti-aliasing widths in input voxels: sigma_k = max(r/u_k - 1, 0) / 3.
inline std::array<double, 3> smoothing_sigmas(const Spacing& input, double target_res_mm) {
  std::array<double, 3> s{};
  for (int a = 0; a < 3; ++a) s[a] = std::max(target_res_mm / input[a] - 1.0, 0.0) / 3.0;
  return s;
}

/// Output dims round(dim * u / r), halves rounded up, clamped to at least 1. A relative slack
/// of 1e-9 keeps decimal spacings such as 0.3 mm from missing an exact half by one ulp.
inline Dims resampled_dims(const Dims& dims, const Spacing& input, double target_res_mm, bool* degenerate = nullptr) {
  Dims out;
  bool clamped = false;
  for (int a = 0; a < 3; ++a) {
    const double exact = static_cast<double>(dims[a]) * input[a] / target_res_mm;
    auto n = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9 * exact));
    if (n == 0) {
      n = 1;
      clamped = true;
    }
    out[a] = n;
  }
  if (degenerate) *degenerate = clamped;
  return out;
}

/// Normalized kernel proportional to exp(-x^2 / sigma^2), truncated at 4 sigma.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-static_cast<double>(i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian smoothing with edge replication. Axes with sigma 0 are untouched.
inline Volume gaussian_smooth(const Volume& in, const std::array<double, 3>& sigmas) {
  Volume cur = in;
  const Dims d = in.dims();
  for (int axis = 0; axis < 3; ++axis) {
    if (sigmas[axis] <= 0.0) continue;
    const auto kernel = gaussian_kernel(sigmas[axis]);
    const int radius = static_cast<int>(kernel.size() / 2);
    const std::size_t n = d[axis];
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.x : d.x * d.y;
    Volume next(d, in.spacing());
    // Lines along `axis`: enumerate their start index over the other two axes.
    const std::size_t lines = in.size() / n;
    parallel_for(lines, [&](std::size_t b, std::size_t e) {
      std::vector<double> line(n);
      for (std::size_t l = b; l < e; ++l) {
        std::size_t start;
        if (axis == 0) start = l * d.x;
        else if (axis == 1) start = (l % d.x) + (l / d.x) * d.x * d.y;
        else start = l;
        for (std::size_t i = 0; i < n; ++i) line[i] = cur[start + i * stride];
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int t = -radius; t <= radius; ++t) {
            auto j = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) + t, 0,
                                                static_cast<std::ptrdiff_t>(n) - 1);
            acc += kernel[t + radius] * line[j];
          }
          next[start + i * stride] = static_cast<float>(acc);
        }
      }
    });
    cur = std::move(next);
  }
  return cur;
}

/// Trilinear sample at continuous voxel coordinates (voxel centres at integers).
/// Returns false when the point lies outside [0, n-1] on any axis.
template <class T>
bool sample_trilinear(const Grid<T>& g, double x, double y, double z, double& out) {
  const Dims d = g.dims();
  const double c[3] = {x, y, z};
  std::size_t i0[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double hi = static_cast<double>(d[a] - 1);
    if (!(c[a] >= 0.0 && c[a] <= hi)) return false;
    if (d[a] == 1) {
      i0[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    auto f = static_cast<std::size_t>(std::floor(c[a]));
    if (f >= d[a] - 1) f = d[a] - 2;
    i0[a] = f;
    frac[a] = c[a] - static_cast<double>(f);
  }
  const std::size_t sx = d.x > 1 ? 1 : 0;
  const std::size_t sy = d.y > 1 ? d.x : 0;
  const std::size_t sz = d.z > 1 ? d.x * d.y : 0;
  const std::size_t base = g.index(i0[0], i0[1], i0[2]);
  auto v = [&](std::size_t off) { return static_cast<double>(g[base + off]); };
  const double fx = frac[0], fy = frac[1], fz = frac[2];
  // Weights that are exactly 0 or 1 reproduce grid values exactly.
  auto lerp = [](double a, double b, double t) { return t == 0.0 ? a : t == 1.0 ? b : a + (b - a) * t; };
  const double c00 = lerp(v(0), v(sx), fx);
  const double c10 = lerp(v(sy), v(sy + sx), fx);
  const double c01 = lerp(v(sz), v(sz + sx), fx);
  const double c11 = lerp(v(sz + sy), v(sz + sy + sx), fx);
  out = lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
  return true;
}

/// Nearest-neighbour sample; false when the rounded index lies outside the grid.
template <class T>
bool sample_nearest(const Grid<T>& g, double x, double y, double z, T& out) {
  const double c[3] = {x, y, z};
  std::size_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const double r = std::floor(c[a] + 0.5);
    if (!(r >= 0.0 && r <= static_cast<double>(g.dims()[a] - 1))) return false;
    idx[a] = static_cast<std::size_t>(r);
  }
  out = g(idx[0], idx[1], idx[2]);
  return true;
}

struct ResampleResult {
  Volume volume;
  bool degenerate = false;  ///< some output dim rounded to 0 and was clamped to 1
};

/// Resamples to isotropic `target_res_mm`. Trilinear input is Gaussian-smoothed first;
/// nearest (label) input never is. Output voxel centres are placed so the physical extent is
/// preserved: input coordinate = (j + 0.5) * r / u - 0.5, clamped to the grid.
template <class T>
Grid<T> resample_grid(const Grid<T>& in, double target_res_mm, Interpolation interp, bool* degenerate = nullptr) {
  if (!(target_res_mm > 0.0) || !std::isfinite(target_res_mm))
    throw InvalidArgument("resample: target resolution must be positive");
  const Dims od = resampled_dims(in.dims(), in.spacing(), target_res_mm, degenerate);
  const Spacing osp{target_res_mm, target_res_mm, target_res_mm};
  Grid<float> smoothed;
  const bool linear = interp == Interpolation::trilinear;
  if (linear) smoothed = gaussian_smooth(convert<float>(in), smoothing_sigmas(in.spacing(), target_res_mm));

  std::array<std::vector<double>, 3> coord;
  for (int a = 0; a < 3; ++a) {
    coord[a].resize(od[a]);
    const double scale = target_res_mm / in.spacing()[a];
    const double hi = static_cast<double>(in.dims()[a] - 1);
    for (std::size_t j = 0; j < od[a]; ++j)
      coord[a][j] = std::clamp((static_cast<double>(j) + 0.5) * scale - 0.5, 0.0, hi);
  }
  Grid<T> out(od, osp);
  parallel_for(od.z, [&](std::size_t zb, std::size_t ze) {
    for (std::size_t z = zb; z < ze; ++z)
      for (std::size_t y = 0; y < od.y; ++y)
        for (std::size_t x = 0; x < od.x; ++x) {
          T v{};
          if (linear) {
            double s = 0.0;
            sample_trilinear(smoothed, coord[0][x], coord[1][y], coord[2][z], s);
            if constexpr (std::is_integral_v<T>) v = static_cast<T>(std::lround(s));
            else v = static_cast<T>(s);
          } else {
            sample_nearest(in, coord[0][x], coord[1][y], coord[2][z], v);
          }
          out(x, y, z) = v;
        }
  });
  return out;
}

inline ResampleResult resample(const Volume& in, double target_res_mm, Interpolation interp) {
  ResampleResult r;
  r.volume = resample_grid(in, target_res_mm, interp, &r.degenerate);
  return r;
}

}  // namespace vf
