#pragma once

// Binary morphology by FFT convolution.
//
// Dilation is D(f,k)(x) = [(f * k)(x) > 0] where f and k are treated as real-valued images.
// Erosion is the complement of the dilation of the complement. Both reduce to linear
// (zero-padded, never circular) convolutions, computed here with real-to-complex FFTs in
// double precision. The inverse transform is binarized at 0.5, since true counts are integers.
//
// Boundary model: the mask is zero outside the volume. Its complement is therefore one
// outside, so structures touching the boundary erode inward. open() and close() are the
// compositions evaluated on the zero-extended mask and then restricted to the volume, which
// keeps closing extensive and both operators idempotent.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "voxelforge/grid.hpp"

namespace vf {

/// Binary kernel with odd dims; the anchor is the centre voxel.
struct StructuringElement {
  Dims dims{1, 1, 1};
  std::vector<std::uint8_t> data{1};
  /// Set when a requested ball was smaller than one voxel and collapsed to a single voxel.
  bool degenerate = false;

  struct Ball {
    double diameter_mm;
    Spacing spacing;
  };
  std::optional<Ball> provenance;

  std::array<std::size_t, 3> anchor() const { return {dims.x / 2, dims.y / 2, dims.z / 2}; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + dims.x * (y + dims.y * z); }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const { return data[index(x, y, z)]; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1)); }

  void validate() const {
    if (dims.x % 2 == 0 || dims.y % 2 == 0 || dims.z % 2 == 0)
      throw InvalidArgument("structuring element dims must be odd");
    if (data.size() != dims.count()) throw InvalidArgument("structuring element data length mismatch");
    if (count() == 0) throw InvalidArgument("structuring element is empty");
  }

  /// Point reflection through the anchor.
  StructuringElement reflected() const {
    StructuringElement r = *this;
    for (std::size_t z = 0; z < dims.z; ++z)
      for (std::size_t y = 0; y < dims.y; ++y)
        for (std::size_t x = 0; x < dims.x; ++x)
          r.data[index(x, y, z)] = at(dims.x - 1 - x, dims.y - 1 - y, dims.z - 1 - z);
    return r;
  }

  static StructuringElement from(Dims dims, std::vector<std::uint8_t> data) {
    StructuringElement e;
    e.dims = dims;
    e.data = std::move(data);
    e.validate();
    return e;
  }
};

/// Voxel offset (i,j,k) from the anchor is set iff (i*u1)^2 + (j*u2)^2 + (k*u3)^2 <= (d/2)^2.
inline StructuringElement ball_element(double diameter_mm, const Spacing& spacing) {
  if (!(diameter_mm > 0.0) || !std::isfinite(diameter_mm)) throw InvalidArgument("ball diameter must be positive");
  for (int a = 0; a < 3; ++a)
    if (!(spacing[a] > 0.0)) throw InvalidArgument("ball spacing must be positive");
  const double r = diameter_mm / 2.0;
  std::array<std::size_t, 3> half{};
  for (int a = 0; a < 3; ++a) half[a] = static_cast<std::size_t>(std::floor(r / spacing[a]));
  StructuringElement e;
  e.dims = {2 * half[0] + 1, 2 * half[1] + 1, 2 * half[2] + 1};
  e.data.assign(e.dims.count(), 0);
  for (std::size_t z = 0; z < e.dims.z; ++z)
    for (std::size_t y = 0; y < e.dims.y; ++y)
      for (std::size_t x = 0; x < e.dims.x; ++x) {
        const double dx = (static_cast<double>(x) - static_cast<double>(half[0])) * spacing.x;
        const double dy = (static_cast<double>(y) - static_cast<double>(half[1])) * spacing.y;
        const double dz = (static_cast<double>(z) - static_cast<double>(half[2])) * spacing.z;
        e.data[e.index(x, y, z)] = dx * dx + dy * dy + dz * dz <= r * r ? 1 : 0;
      }
  e.degenerate = e.dims.count() == 1;
  e.provenance = StructuringElement::Ball{diameter_mm, spacing};
  return e;
}

/// Ball of the given diameter in voxel units (unit spacing).
inline StructuringElement ball_element_voxels(double diameter_vox) {
  return ball_element(diameter_vox, Spacing{1.0, 1.0, 1.0});
}

namespace morph_detail {

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
inline std::size_t next_smooth_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// The FFTW planner is not thread-safe; executing a finished plan is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw Error("FFTW failed to create a plan");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  void execute() const { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

/// Linear convolution of a binary image with the element, evaluated at every image voxel with
/// the element centred on it: out(x) = sum_y f(y) k(x - y + anchor).
inline std::vector<double> centered_convolution(const std::uint8_t* f, const Dims& fd, const StructuringElement& k) {
  const Dims& kd = k.dims;
  const std::size_t px = next_smooth_size(fd.x + kd.x - 1);
  const std::size_t py = next_smooth_size(fd.y + kd.y - 1);
  const std::size_t pz = next_smooth_size(fd.z + kd.z - 1);
  const std::size_t nreal = px * py * pz;
  const std::size_t ncx = px / 2 + 1;
  const std::size_t ncomplex = pz * py * ncx;

  std::unique_ptr<double, FftwFree> a(fftw_alloc_real(nreal));
  std::unique_ptr<double, FftwFree> b(fftw_alloc_real(nreal));
  std::unique_ptr<fftw_complex, FftwFree> fa(fftw_alloc_complex(ncomplex));
  std::unique_ptr<fftw_complex, FftwFree> fb(fftw_alloc_complex(ncomplex));
  if (!a || !b || !fa || !fb) throw Error("FFT buffer allocation failed");

  std::optional<Plan> fwd_a, fwd_b, inv;
  {
    std::lock_guard lock(planner_mutex());
    const int n0 = static_cast<int>(pz), n1 = static_cast<int>(py), n2 = static_cast<int>(px);
    fwd_a.emplace(fftw_plan_dft_r2c_3d(n0, n1, n2, a.get(), fa.get(), FFTW_ESTIMATE));
    fwd_b.emplace(fftw_plan_dft_r2c_3d(n0, n1, n2, b.get(), fb.get(), FFTW_ESTIMATE));
    inv.emplace(fftw_plan_dft_c2r_3d(n0, n1, n2, fa.get(), a.get(), FFTW_ESTIMATE));
  }

  std::fill_n(a.get(), nreal, 0.0);
  std::fill_n(b.get(), nreal, 0.0);
  for (std::size_t z = 0; z < fd.z; ++z)
    for (std::size_t y = 0; y < fd.y; ++y)
      for (std::size_t x = 0; x < fd.x; ++x)
        a.get()[x + px * (y + py * z)] = f[x + fd.x * (y + fd.y * z)] ? 1.0 : 0.0;
  for (std::size_t z = 0; z < kd.z; ++z)
    for (std::size_t y = 0; y < kd.y; ++y)
      for (std::size_t x = 0; x < kd.x; ++x) b.get()[x + px * (y + py * z)] = k.at(x, y, z) ? 1.0 : 0.0;

  fwd_a->execute();
  fwd_b->execute();
  auto* ca = reinterpret_cast<std::complex<double>*>(fa.get());
  const auto* cb = reinterpret_cast<const std::complex<double>*>(fb.get());
  for (std::size_t i = 0; i < ncomplex; ++i) ca[i] *= cb[i];
  inv->execute();

  const double scale = 1.0 / static_cast<double>(nreal);
  const auto h = k.anchor();
  std::vector<double> out(fd.count());
  for (std::size_t z = 0; z < fd.z; ++z)
    for (std::size_t y = 0; y < fd.y; ++y)
      for (std::size_t x = 0; x < fd.x; ++x)
        out[x + fd.x * (y + fd.y * z)] = a.get()[(x + h[0]) + px * ((y + h[1]) + py * (z + h[2]))] * scale;
  return out;
}

inline void check_fits(const Dims& md, const StructuringElement& e) {
  e.validate();
  if (e.dims.x > 2 * md.x + 1 || e.dims.y > 2 * md.y + 1 || e.dims.z > 2 * md.z + 1)
    throw InvalidArgument("structuring element is larger than the mask");
}

/// Raw dilation of a binary buffer with zero boundary.
inline std::vector<std::uint8_t> dilate_raw(const std::vector<std::uint8_t>& f, const Dims& d,
                                            const StructuringElement& e) {
  const auto c = centered_convolution(f.data(), d, e);
  std::vector<std::uint8_t> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] > 0.5 ? 1 : 0;
  return out;
}

/// Raw erosion: complement of the dilation of the complement, where the complement is
/// one outside the buffer. Computed on a buffer grown by the element radius.
inline std::vector<std::uint8_t> erode_raw(const std::vector<std::uint8_t>& f, const Dims& d,
                                           const StructuringElement& e) {
  const auto h = e.anchor();
  const Dims ext{d.x + 2 * h[0], d.y + 2 * h[1], d.z + 2 * h[2]};
  std::vector<std::uint8_t> comp(ext.count(), 1);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x)
        comp[(x + h[0]) + ext.x * ((y + h[1]) + ext.y * (z + h[2]))] = f[x + d.x * (y + d.y * z)] ? 0 : 1;
  const auto grown = dilate_raw(comp, ext, e);
  std::vector<std::uint8_t> out(d.count());
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x)
        out[x + d.x * (y + d.y * z)] = grown[(x + h[0]) + ext.x * ((y + h[1]) + ext.y * (z + h[2]))] ? 0 : 1;
  return out;
}

}  // namespace morph_detail

inline Mask dilate(const Mask& mask, const StructuringElement& e) {
  morph_detail::check_fits(mask.dims(), e);
  return Mask(mask.dims(), mask.spacing(), morph_detail::dilate_raw(mask.storage(), mask.dims(), e));
}

inline Mask erode(const Mask& mask, const StructuringElement& e) {
  morph_detail::check_fits(mask.dims(), e);
  return Mask(mask.dims(), mask.spacing(), morph_detail::erode_raw(mask.storage(), mask.dims(), e));
}

/// dilate(erode(m)). The eroded set lies inside the volume, so no extension is needed.
inline Mask open(const Mask& mask, const StructuringElement& e) { return dilate(erode(mask, e), e); }

/// erode(dilate(m)) evaluated on the mask zero-extended by the element radius, then cropped.
inline Mask close(const Mask& mask, const StructuringElement& e) {
  morph_detail::check_fits(mask.dims(), e);
  const Dims d = mask.dims();
  const auto h = e.anchor();
  const Dims ext{d.x + 2 * h[0], d.y + 2 * h[1], d.z + 2 * h[2]};
  std::vector<std::uint8_t> padded(ext.count(), 0);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x)
        padded[(x + h[0]) + ext.x * ((y + h[1]) + ext.y * (z + h[2]))] = mask(x, y, z);
  const auto closed = morph_detail::erode_raw(morph_detail::dilate_raw(padded, ext, e), ext, e);
  Mask out(d, mask.spacing());
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x)
        out(x, y, z) = closed[(x + h[0]) + ext.x * ((y + h[1]) + ext.y * (z + h[2]))];
  return out;
}

/// Erosion of the mask extended beyond the volume by edge replication (each outside voxel
/// takes the value of the nearest volume voxel). Foreground touching a face stays attached
/// to that face instead of eroding inward.
inline Mask erode_edge_extended(const Mask& mask, const StructuringElement& e) {
  morph_detail::check_fits(mask.dims(), e);
  const Dims d = mask.dims();
  const auto h = e.anchor();
  const Dims ext{d.x + 2 * h[0], d.y + 2 * h[1], d.z + 2 * h[2]};
  std::vector<std::uint8_t> padded(ext.count());
  auto src = [](std::size_t i, std::size_t pad, std::size_t n) {
    return i < pad ? 0 : std::min(i - pad, n - 1);
  };
  for (std::size_t z = 0; z < ext.z; ++z)
    for (std::size_t y = 0; y < ext.y; ++y)
      for (std::size_t x = 0; x < ext.x; ++x)
        padded[x + ext.x * (y + ext.y * z)] = mask(src(x, h[0], d.x), src(y, h[1], d.y), src(z, h[2], d.z));
  const auto eroded = morph_detail::erode_raw(padded, ext, e);
  Mask out(d, mask.spacing());
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x)
        out(x, y, z) = eroded[(x + h[0]) + ext.x * ((y + h[1]) + ext.y * (z + h[2]))];
  return out;
}

}  // namespace vf
