#pragma once

// Synthetic CT torso with known organ masks. Used as ground truth for the labelers.

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "voxelforge/grid.hpp"
#include "voxelforge/noise.hpp"
#include "voxelforge/random.hpp"

namespace vf {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Ellipsoid {
  Vec3 center;  ///< mm
  Vec3 radii;   ///< mm
  double hu;
};

/// Hollow rod between two points: cortical shell around a marrow core.
struct BoneRod {
  Vec3 a, b;  ///< segment endpoints, mm
  double outer_radius_mm;
  double shell_mm;
  double shell_hu = 300.0;
  double marrow_hu = 100.0;
};

struct PhantomSpec {
  Dims dims{96, 80, 64};
  Spacing spacing{3.0, 3.0, 3.0};
  double background_hu = -1000.0;
  /// Elliptic cylinder along z; center.z and radii.z are ignored.
  Ellipsoid body{{144.0, 120.0, 0.0}, {125.0, 95.0, 0.0}, 40.0};
  std::vector<Ellipsoid> lungs{{{84.0, 105.0, 96.0}, {42.0, 50.0, 70.0}, -800.0},
                               {{204.0, 105.0, 96.0}, {42.0, 50.0, 70.0}, -800.0}};
  std::vector<BoneRod> bones{{{144.0, 185.0, -30.0}, {144.0, 185.0, 220.0}, 15.0, 5.0},
                             {{70.0, 185.0, 40.0}, {218.0, 185.0, 40.0}, 12.0, 4.0}};
  /// Painted last, outside every truth mask (contrast blobs, bowel gas, ...).
  std::vector<Ellipsoid> extras;
  bool table = false;      ///< dense slab under the body, separated by an air gap
  double table_hu = 150.0;
  double noise_sigma = 20.0;
  /// Least body tissue between a lung and the body surface in the axial plane.
  double min_wall_mm = 6.0;

  void validate() const;
};

struct Phantom {
  Volume ct;
  std::map<std::string, Mask> truth;  ///< "lung", "bone", "body"
};

namespace phantom_detail {

inline Vec3 voxel_mm(const Spacing& sp, std::size_t x, std::size_t y, std::size_t z) {
  return {static_cast<double>(x) * sp.x, static_cast<double>(y) * sp.y, static_cast<double>(z) * sp.z};
}

inline bool inside(const Ellipsoid& e, const Vec3& p) {
  const double dx = (p.x - e.center.x) / e.radii.x;
  const double dy = (p.y - e.center.y) / e.radii.y;
  const double dz = (p.z - e.center.z) / e.radii.z;
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

inline bool inside_cylinder(const Ellipsoid& e, const Vec3& p) {
  const double dx = (p.x - e.center.x) / e.radii.x;
  const double dy = (p.y - e.center.y) / e.radii.y;
  return dx * dx + dy * dy <= 1.0;
}

inline double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab{b.x - a.x, b.y - a.y, b.z - a.z};
  const Vec3 ap{p.x - a.x, p.y - a.y, p.z - a.z};
  const double len2 = ab.x * ab.x + ab.y * ab.y + ab.z * ab.z;
  double t = len2 > 0 ? (ap.x * ab.x + ap.y * ab.y + ap.z * ab.z) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 d{ap.x - t * ab.x, ap.y - t * ab.y, ap.z - t * ab.z};
  return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
}

/// True when the lung cross-section grown outward by wall_mm (along sampled boundary normals)
/// stays inside the body cylinder.
inline bool lung_clears_body(const Ellipsoid& lung, const Ellipsoid& body, double wall_mm) {
  constexpr int kSamples = 720;
  for (int k = 0; k < kSamples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / kSamples;
    const double c = std::cos(t), s = std::sin(t);
    // Outward normal of the lung ellipse at this point, then step wall_mm along it.
    const double nx = c / lung.radii.x, ny = s / lung.radii.y;
    const double nn = std::hypot(nx, ny);
    const Vec3 p{lung.center.x + lung.radii.x * c + wall_mm * nx / nn,
                 lung.center.y + lung.radii.y * s + wall_mm * ny / nn, 0.0};
    if (!inside_cylinder(body, p)) return false;
  }
  return true;
}

inline Vec3 extent(const PhantomSpec& s) {
  return {static_cast<double>(s.dims.x - 1) * s.spacing.x, static_cast<double>(s.dims.y - 1) * s.spacing.y,
          static_cast<double>(s.dims.z - 1) * s.spacing.z};
}

}  // namespace phantom_detail

inline void PhantomSpec::validate() const {
  using namespace phantom_detail;
  const Vec3 ext = extent(*this);
  auto in_xy = [&](double x, double y) { return x >= 0 && y >= 0 && x <= ext.x && y <= ext.y; };
  auto contained = [&](const Ellipsoid& e) {
    return in_xy(e.center.x - e.radii.x, e.center.y - e.radii.y) &&
           in_xy(e.center.x + e.radii.x, e.center.y + e.radii.y) && e.center.z - e.radii.z >= 0 &&
           e.center.z + e.radii.z <= ext.z;
  };
  if (dims.count() == 0) throw InvalidArgument("phantom dims must be positive");
  if (!in_xy(body.center.x - body.radii.x, body.center.y - body.radii.y) ||
      !in_xy(body.center.x + body.radii.x, body.center.y + body.radii.y))
    throw InvalidArgument("phantom body exceeds the volume");
  for (const auto& l : lungs) {
    if (!contained(l)) throw InvalidArgument("phantom lung exceeds the volume");
    if (!lung_clears_body(l, body, min_wall_mm))
      throw InvalidArgument("phantom lung is not inside the body with the required wall");
  }
  for (const auto& b : bones)
    for (const auto* p : {&b.a, &b.b})
      if (!inside_cylinder(body, {p->x, p->y, 0.0}))
        throw InvalidArgument("phantom bone endpoint is outside the body");
  for (const auto& e : extras)
    if (!contained(e)) throw InvalidArgument("phantom extra shape exceeds the volume");
  if (!(min_wall_mm >= 0.0)) throw InvalidArgument("phantom wall thickness must be >= 0");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("phantom noise sigma must be >= 0");
}

/// Randomly perturbed default torso: positions jittered by up to 6 mm, sizes by up to 10%.
/// A lung draw that would thin the chest wall below min_wall_mm is redrawn.
inline PhantomSpec randomized_phantom_spec(std::uint64_t seed, PhantomSpec base = {}) {
  CounterStream rng(seed, 7);
  auto jitter = [&](double& v, double amount) { v += rng.uniform(-amount, amount); };
  auto scale = [&](double& v) { v *= rng.uniform(0.9, 1.1); };
  for (auto& l : base.lungs) {
    const Ellipsoid orig = l;
    for (int attempt = 0; attempt < 64; ++attempt) {
      l = orig;
      jitter(l.center.x, 6.0);
      jitter(l.center.y, 6.0);
      jitter(l.center.z, 6.0);
      scale(l.radii.x);
      scale(l.radii.y);
      scale(l.radii.z);
      if (phantom_detail::lung_clears_body(l, base.body, base.min_wall_mm)) break;
      l = orig;
    }
  }
  for (auto& b : base.bones) {
    const double dx = rng.uniform(-6.0, 6.0), dy = rng.uniform(-6.0, 6.0);
    b.a.x += dx;
    b.b.x += dx;
    b.a.y += dy;
    b.b.y += dy;
    scale(b.outer_radius_mm);
  }
  return base;
}

/// Renders the phantom. Deterministic in (spec, seed).
inline Phantom make_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  using namespace phantom_detail;
  spec.validate();
  Phantom ph;
  const Dims d = spec.dims;
  ph.ct = Volume(d, spec.spacing, static_cast<float>(spec.background_hu));
  Mask lung(d, spec.spacing), bone(d, spec.spacing), body(d, spec.spacing);
  const double table_top = spec.body.center.y + spec.body.radii.y + 2.0 * spec.spacing.y;

  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        const Vec3 p = voxel_mm(spec.spacing, x, y, z);
        const std::size_t i = ph.ct.index(x, y, z);
        double hu = spec.background_hu;
        int organ = 0;  // 1 lung, 2 bone
        if (inside_cylinder(spec.body, p)) {
          hu = spec.body.hu;
          body[i] = 1;
        } else if (spec.table && p.y >= table_top && p.y <= table_top + 4.0 * spec.spacing.y) {
          hu = spec.table_hu;
        }
        for (const auto& l : spec.lungs)
          if (inside(l, p)) {
            hu = l.hu;
            organ = 1;
          }
        // Marrow cores of crossing rods merge; shells only show outside every core.
        bool in_core = false, in_shell = false;
        double core_hu = 0.0, shell_hu = 0.0;
        for (const auto& b : spec.bones) {
          const double r = distance_to_segment(p, b.a, b.b);
          if (r <= b.outer_radius_mm - b.shell_mm) {
            in_core = true;
            core_hu = b.marrow_hu;
          } else if (r <= b.outer_radius_mm) {
            in_shell = true;
            shell_hu = b.shell_hu;
          }
        }
        if (in_core || in_shell) {
          hu = in_core ? core_hu : shell_hu;
          organ = 2;
        }
        for (const auto& e : spec.extras)
          if (inside(e, p)) {
            hu = e.hu;
            organ = 0;
          }
        ph.ct[i] = static_cast<float>(hu);
        lung[i] = organ == 1;
        bone[i] = organ == 2;
      }

  if (spec.noise_sigma > 0.0) {
    const auto noise = generate_noise(d, spec.noise_sigma, mix64(seed ^ 0x70616E746F6Dull));
    for (std::size_t i = 0; i < ph.ct.size(); ++i) ph.ct[i] += noise[i];
  }
  ph.truth.emplace("lung", std::move(lung));
  ph.truth.emplace("bone", std::move(bone));
  ph.truth.emplace("body", std::move(body));
  return ph;
}

}  // namespace vf
