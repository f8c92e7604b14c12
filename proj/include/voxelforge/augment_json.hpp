#pragma once

// JSON forms of AugmentSpec (input) and TransformParams (per-item provenance record).

#include <nlohmann/json.hpp>

#include "voxelforge/augment.hpp"

namespace vf {

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }

inline void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("range must be [lo, hi]");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(nlohmann::json& j, const AugmentSpec& s) {
  j = {{"rotation_rad", s.rotation_rad},
       {"scale", s.scale},
       {"shear", s.shear},
       {"reflect_prob", s.reflect_prob},
       {"affine_perturb", s.affine_perturb},
       {"displacement_vox", s.displacement_vox},
       {"occlusion_max_vox", s.occlusion_max_vox},
       {"noise_sigma", s.noise_sigma},
       {"window_lower", s.window_lower},
       {"window_upper", s.window_upper},
       {"seed", s.seed}};
}

/// Missing fields keep their defaults; unknown fields are rejected.
inline void from_json(const nlohmann::json& j, AugmentSpec& s) {
  static const char* known[] = {"rotation_rad",     "scale",        "shear",        "reflect_prob",
                                "affine_perturb",   "displacement_vox", "occlusion_max_vox",
                                "noise_sigma",      "window_lower", "window_upper", "seed"};
  if (!j.is_object()) throw InvalidArgument("augment spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw InvalidArgument("augment spec: unknown field '" + key + "'");
  try {
    if (j.contains("rotation_rad")) s.rotation_rad = j["rotation_rad"].get<std::array<Range, 3>>();
    if (j.contains("scale")) s.scale = j["scale"].get<std::array<Range, 3>>();
    if (j.contains("shear")) s.shear = j["shear"].get<Range>();
    if (j.contains("reflect_prob")) s.reflect_prob = j["reflect_prob"].get<std::array<double, 3>>();
    if (j.contains("affine_perturb")) s.affine_perturb = j["affine_perturb"].get<Range>();
    if (j.contains("displacement_vox")) s.displacement_vox = j["displacement_vox"].get<std::array<double, 3>>();
    if (j.contains("occlusion_max_vox")) s.occlusion_max_vox = j["occlusion_max_vox"].get<double>();
    if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<Range>();
    if (j.contains("window_lower")) s.window_lower = j["window_lower"].get<Range>();
    if (j.contains("window_upper")) s.window_upper = j["window_upper"].get<Range>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("augment spec: ") + e.what());
  }
  s.validate();
}

inline void to_json(nlohmann::json& j, const TransformParams& p) {
  j = {{"A", p.A},
       {"b_offset", p.b_offset},
       {"displacement", p.displacement},
       {"occlusion_start", p.occlusion_start},
       {"occlusion_height", p.occlusion_height},
       {"noise_sigma", p.noise_sigma},
       {"window", {p.window_lo, p.window_hi}},
       {"noise_seed", p.noise_seed}};
}

inline void from_json(const nlohmann::json& j, TransformParams& p) {
  p.A = j.at("A").get<Mat3>();
  p.b_offset = j.at("b_offset").get<Vec3d>();
  p.displacement = j.at("displacement").get<Vec3d>();
  p.occlusion_start = j.at("occlusion_start").get<double>();
  p.occlusion_height = j.at("occlusion_height").get<double>();
  p.noise_sigma = j.at("noise_sigma").get<double>();
  p.window_lo = j.at("window").at(0).get<double>();
  p.window_hi = j.at("window").at(1).get<double>();
  p.noise_seed = j.at("noise_seed").get<std::uint64_t>();
}

}  // namespace vf
