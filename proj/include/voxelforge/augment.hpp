#pragma once

// Random 3D augmentation: affine warp, occlusion, additive noise and intensity window,
// evaluated in a single pass per output voxel.

#include <array>
#include <cmath>
#include <cstdint>

#include "voxelforge/grid.hpp"
#include "voxelforge/parallel.hpp"
#include "voxelforge/random.hpp"
#include "voxelforge/resample.hpp"

namespace vf {

using Vec3d = std::array<double, 3>;
using Mat3 = std::array<Vec3d, 3>;

inline constexpr Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return r;
}

inline Vec3d operator*(const Mat3& a, const Vec3d& v) {
  return {a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2], a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
          a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2]};
}

inline double det(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Mat3 rotation_x(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
inline Mat3 rotation_y(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
inline Mat3 rotation_z(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

struct Range {
  double lo = 0.0, hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// User-specified ranges from which each TransformParams is drawn uniformly.
struct AugmentSpec {
  std::array<Range, 3> rotation_rad{};                           ///< about x, y, z
  std::array<Range, 3> scale{{{1, 1}, {1, 1}, {1, 1}}};
  Range shear{};                                                 ///< xy, xz and yz coefficients
  std::array<double, 3> reflect_prob{};                          ///< per axis
  Range affine_perturb{};                                        ///< added to each entry of I
  std::array<double, 3> displacement_vox{};                      ///< d_k ~ U[-d_max_k, d_max_k]
  double occlusion_max_vox = 0.0;                                ///< delta_max
  Range noise_sigma{};
  Range window_lower{-150.0, -150.0};                            ///< a
  Range window_upper{230.0, 230.0};                              ///< b
  std::uint64_t seed = 0;

  void validate() const {
    auto ordered = [](const Range& r, const char* what) {
      if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw InvalidArgument(std::string("augment spec: range '") + what + "' must satisfy lo <= hi");
    };
    for (const auto& r : rotation_rad) ordered(r, "rotation_rad");
    for (const auto& r : scale) ordered(r, "scale");
    ordered(shear, "shear");
    ordered(affine_perturb, "affine_perturb");
    ordered(noise_sigma, "noise_sigma");
    ordered(window_lower, "window_lower");
    ordered(window_upper, "window_upper");
    for (double p : reflect_prob)
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("augment spec: reflect_prob must be in [0,1]");
    for (double d : displacement_vox)
      if (!(d >= 0.0)) throw InvalidArgument("augment spec: displacement_vox must be >= 0");
    if (!(occlusion_max_vox >= 0.0)) throw InvalidArgument("augment spec: occlusion_max_vox must be >= 0");
    if (!(noise_sigma.lo >= 0.0)) throw InvalidArgument("augment spec: noise_sigma must be >= 0");
    if (!(window_lower.lo < window_upper.hi)) throw InvalidArgument("augment spec: no window with a < b exists");
  }
};

/// Fully resolved transform for one item. Output voxel x samples the input at A x + b_offset.
struct TransformParams {
  Mat3 A = identity3();
  Vec3d b_offset{};
  Vec3d displacement{};       ///< d; the volume centre c maps to c + d
  double occlusion_start = 0.0;   ///< z0
  double occlusion_height = 0.0;  ///< delta; voxels with z0 <= z < z0 + delta are blanked
  double noise_sigma = 0.0;
  double window_lo = 0.0, window_hi = 1.0;
  std::uint64_t noise_seed = 0;

  friend bool operator==(const TransformParams&, const TransformParams&) = default;
};

inline Vec3d volume_center(const Dims& d) {
  return {(static_cast<double>(d.x) - 1.0) / 2.0, (static_cast<double>(d.y) - 1.0) / 2.0,
          (static_cast<double>(d.z) - 1.0) / 2.0};
}

/// b = c + d - A c, so that A c + b = c + d.
inline Vec3d centered_offset(const Mat3& A, const Vec3d& c, const Vec3d& d) {
  const Vec3d ac = A * c;
  return {c[0] + d[0] - ac[0], c[1] + d[1] - ac[1], c[2] + d[2] - ac[2]};
}

/// Draws a TransformParams for a volume of `dims`.
/// A = reflection * Rz * Ry * Rx * shear * scale * generic, each factor drawn from its range.
inline TransformParams sample_params(const AugmentSpec& spec, const Dims& dims, std::uint64_t seed) {
  spec.validate();
  CounterStream rng(seed);
  TransformParams p;
  constexpr int kMaxAttempts = 1000;

  Mat3 A{};
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt == kMaxAttempts) throw InvalidArgument("augment spec only yields singular affine maps");
    Mat3 reflect = identity3();
    for (int a = 0; a < 3; ++a)
      if (rng.bernoulli(spec.reflect_prob[a])) reflect[a][a] = -1.0;
    const double rx = rng.uniform(spec.rotation_rad[0].lo, spec.rotation_rad[0].hi);
    const double ry = rng.uniform(spec.rotation_rad[1].lo, spec.rotation_rad[1].hi);
    const double rz = rng.uniform(spec.rotation_rad[2].lo, spec.rotation_rad[2].hi);
    Mat3 shear = identity3();
    shear[0][1] = rng.uniform(spec.shear.lo, spec.shear.hi);
    shear[0][2] = rng.uniform(spec.shear.lo, spec.shear.hi);
    shear[1][2] = rng.uniform(spec.shear.lo, spec.shear.hi);
    Mat3 scale = identity3();
    for (int a = 0; a < 3; ++a) scale[a][a] = rng.uniform(spec.scale[a].lo, spec.scale[a].hi);
    Mat3 generic = identity3();
    for (auto& row : generic)
      for (auto& v : row) v += rng.uniform(spec.affine_perturb.lo, spec.affine_perturb.hi);
    A = reflect * rotation_z(rz) * rotation_y(ry) * rotation_x(rx) * shear * scale * generic;
    if (std::abs(det(A)) > 1e-9) break;
  }
  p.A = A;
  for (int a = 0; a < 3; ++a)
    p.displacement[a] = rng.uniform(-spec.displacement_vox[a], spec.displacement_vox[a]);
  p.b_offset = centered_offset(A, volume_center(dims), p.displacement);

  const double zmax = static_cast<double>(dims.z) - 1.0;
  p.occlusion_height = rng.uniform(0.0, spec.occlusion_max_vox);
  p.occlusion_start = rng.uniform(-spec.occlusion_max_vox, zmax);
  p.noise_sigma = rng.uniform(spec.noise_sigma.lo, spec.noise_sigma.hi);
  for (attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) throw InvalidArgument("augment spec: could not draw a window with a < b");
    p.window_lo = rng.uniform(spec.window_lower.lo, spec.window_lower.hi);
    p.window_hi = rng.uniform(spec.window_upper.lo, spec.window_upper.hi);
    if (p.window_lo < p.window_hi) break;
  }
  p.noise_seed = combine_seed(seed, 0x6E6F697365ull);
  return p;
}

struct ApplyOptions {
  /// Output value (window scale, 0..1) for samples falling outside the input volume.
  double fill_value = 0.0;
  /// Also zero the labels inside the occluded prism.
  bool occlude_labels = false;
  unsigned threads = 0;
};

struct AugmentedPair {
  Volume image;     ///< values in [0, 1]
  LabelMap labels;
  TransformParams params;
};

/// Clamp to [a, b] and map affinely to [0, 1].
inline double window_value(double v, double a, double b) { return std::min(std::max((v - a) / (b - a), 0.0), 1.0); }

/// Per output voxel x:
///  1. occluded (z0 <= x_z < z0 + delta): image 0, nothing else evaluated;
///  2. trilinear sample of the image at A x + b (nearest for labels);
///  3. add sigma * n(x) with n keyed by (noise_seed, linear index of x);
///  4. window to [0, 1].
template <class T>
AugmentedPair apply(const Grid<T>& image, const LabelMap& labels, const TransformParams& params,
                    const ApplyOptions& opt = {}) {
  if (!image.same_geometry(labels)) throw InvalidArgument("apply: image and labels must share geometry");
  if (std::abs(det(params.A)) <= 1e-12) throw InvalidArgument("apply: singular affine matrix");
  if (!(params.window_lo < params.window_hi)) throw InvalidArgument("apply: window needs a < b");
  if (!(params.noise_sigma >= 0.0)) throw InvalidArgument("apply: noise sigma must be >= 0");
  const Dims d = image.dims();
  AugmentedPair out{Volume(d, image.spacing()), LabelMap(d, image.spacing()), params};
  const auto& A = params.A;
  const auto& b = params.b_offset;
  const double a_lo = params.window_lo, a_hi = params.window_hi;
  const double fill = a_lo + opt.fill_value * (a_hi - a_lo);
  const double z0 = params.occlusion_start, z1 = params.occlusion_start + params.occlusion_height;

  parallel_for(
      d.z,
      [&](std::size_t zb, std::size_t ze) {
        for (std::size_t z = zb; z < ze; ++z) {
          const double zf = static_cast<double>(z);
          const bool occluded = zf >= z0 && zf < z1;
          for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
              const std::size_t i = out.image.index(x, y, z);
              const double xf = static_cast<double>(x), yf = static_cast<double>(y);
              const double sx = A[0][0] * xf + A[0][1] * yf + A[0][2] * zf + b[0];
              const double sy = A[1][0] * xf + A[1][1] * yf + A[1][2] * zf + b[1];
              const double sz = A[2][0] * xf + A[2][1] * yf + A[2][2] * zf + b[2];
              std::uint8_t lab = 0;
              sample_nearest(labels, sx, sy, sz, lab);
              out.labels[i] = (occluded && opt.occlude_labels) ? 0 : lab;
              if (occluded) {
                out.image[i] = 0.0f;
                continue;
              }
              double v;
              if (!sample_trilinear(image, sx, sy, sz, v)) v = fill;
              if (params.noise_sigma > 0.0) v += params.noise_sigma * normal_at(params.noise_seed, i);
              out.image[i] = static_cast<float>(window_value(v, a_lo, a_hi));
            }
        }
      },
      opt.threads);
  return out;
}

}  // namespace vf
