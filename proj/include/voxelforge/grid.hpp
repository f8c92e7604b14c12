#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "voxelforge/error.hpp"

namespace vf {

/// Voxel counts along x, y and z.
struct Dims {
  std::size_t x = 1, y = 1, z = 1;

  constexpr std::size_t count() const { return x * y * z; }
  constexpr std::size_t operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  std::size_t& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

/// Physical voxel size in millimetres.
struct Spacing {
  double x = 1.0, y = 1.0, z = 1.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  double& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

enum class Dtype { float32, int16, uint8 };

inline std::string_view to_string(Dtype t) {
  switch (t) {
    case Dtype::float32: return "float32";
    case Dtype::int16: return "int16";
    case Dtype::uint8: return "uint8";
  }
  return "?";
}

inline Dtype parse_dtype(std::string_view s) {
  if (s == "float32") return Dtype::float32;
  if (s == "int16") return Dtype::int16;
  if (s == "uint8") return Dtype::uint8;
  throw FormatError("unsupported dtype '" + std::string(s) + "'");
}

template <class T>
constexpr Dtype dtype_of() {
  if constexpr (std::is_same_v<T, float>) return Dtype::float32;
  else if constexpr (std::is_same_v<T, std::int16_t>) return Dtype::int16;
  else {
    static_assert(std::is_same_v<T, std::uint8_t>, "unsupported voxel type");
    return Dtype::uint8;
  }
}

/// Dense 3D grid stored x-fastest, then y, then z.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(Dims dims, Spacing spacing, T fill = T{}) : dims_(dims), spacing_(spacing) {
    validate_geometry();
    data_.assign(dims_.count(), fill);
  }

  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_geometry();
    if (data_.size() != dims_.count())
      throw InvalidArgument("grid data length " + std::to_string(data_.size()) +
                            " does not match dims product " + std::to_string(dims_.count()));
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.x * (y + dims_.y * z);
  }
  std::array<std::size_t, 3> coords(std::size_t i) const {
    return {i % dims_.x, (i / dims_.x) % dims_.y, i / (dims_.x * dims_.y)};
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }

  template <class U>
  bool same_geometry(const Grid<U>& other) const {
    return dims_ == other.dims() && spacing_ == other.spacing();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void validate_geometry() const {
    if (dims_.x == 0 || dims_.y == 0 || dims_.z == 0)
      throw InvalidArgument("grid dims must be positive");
    for (int a = 0; a < 3; ++a)
      if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
        throw InvalidArgument("grid spacing must be positive and finite");
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

/// Scalar image (HU, probabilities, noise).
using Volume = Grid<float>;
/// Binary mask, every value 0 or 1.
using Mask = Grid<std::uint8_t>;
/// Class codes 0..5, see LabelClass.
using LabelMap = Grid<std::uint8_t>;

enum class LabelClass : std::uint8_t { background = 0, lung = 1, liver = 2, bone = 3, kidney = 4, bladder = 5 };
inline constexpr std::size_t kNumClasses = 6;

template <class T>
bool is_binary(const Grid<T>& g) {
  for (const T& v : g.data())
    if (!(v == T(0) || v == T(1))) return false;
  return true;
}

inline bool is_label_map(const LabelMap& g) {
  for (auto v : g.data())
    if (v >= kNumClasses) return false;
  return true;
}

template <class To, class From>
Grid<To> convert(const Grid<From>& g) {
  std::vector<To> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<To>(g[i]);
  return Grid<To>(g.dims(), g.spacing(), std::move(out));
}

inline std::size_t count_nonzero(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

inline Mask complement(const Mask& m) {
  Mask out(m.dims(), m.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
  return out;
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) throw InvalidArgument("mask_and: dims differ");
  Mask out(a.dims(), a.spacing());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) throw InvalidArgument("mask_or: dims differ");
  Mask out(a.dims(), a.spacing());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

/// True when every voxel set in `a` is also set in `b`.
inline bool is_subset(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace vf
