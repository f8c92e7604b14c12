#pragma once

// Segmentation losses on probability fields: smooth IOU (Jaccard) and Dice losses, the
// power and general monotone-map IOU families, and weighted cross-entropy. All sums use a
// fixed pairwise reduction, so values do not depend on how callers split the work.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxelforge/grid.hpp"

namespace vf {

struct LossReport {
  double value = 0.0;
  std::optional<std::vector<double>> gradient;  ///< dL/dp_k, length n
  std::map<std::size_t, double> per_class;
};

enum class LossKind { iou, dice, iou_power, wce };

/// `frequency` weights a voxel by (1-y)(1-w) + y w; inverse_frequency swaps the two.
enum class CrossEntropyWeights { frequency, inverse_frequency };

inline constexpr double kProbabilityClip = 1e-7;

/// Pairwise (tree) summation with a fixed split rule.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

namespace loss_detail {

inline void check_fields(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size())
    throw InvalidArgument("loss: length mismatch (" + std::to_string(p.size()) + " vs " + std::to_string(y.size()) + ")");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("loss: probabilities must lie in [0, 1]");
  for (double v : y)
    if (!(v == 0.0 || v == 1.0)) throw InvalidArgument("loss: labels must be 0 or 1");
}

/// 1 - I/U with I = sum q y, U = sum q + sum y - I, where q = f(p). dq holds f'(p).
/// Convention: U == 0 gives loss 0 and zero gradient.
inline LossReport iou_of_mapped(std::span<const double> q, std::span<const double> dq, std::span<const double> y,
                                bool with_grad) {
  const std::size_t n = q.size();
  std::vector<double> qy(n);
  for (std::size_t k = 0; k < n; ++k) qy[k] = q[k] * y[k];
  const double I = pairwise_sum(qy);
  const double U = pairwise_sum(q) + pairwise_sum(y) - I;
  LossReport r;
  if (U <= 0.0) {
    r.value = 0.0;
    if (with_grad) r.gradient = std::vector<double>(n, 0.0);
    return r;
  }
  r.value = std::clamp(1.0 - I / U, 0.0, 1.0);
  if (with_grad) {
    std::vector<double> g(n);
    const double inv = 1.0 / (U * U);
    for (std::size_t k = 0; k < n; ++k) g[k] = dq[k] * (I * (1.0 - y[k]) - U * y[k]) * inv;
    r.gradient = std::move(g);
  }
  return r;
}

}  // namespace loss_detail

/// L = 1 - |py| / (|p| + |y| - |py|), with L(0, 0) = 0.
inline LossReport iou_loss(std::span<const double> p, std::span<const double> y, bool with_grad = true) {
  loss_detail::check_fields(p, y);
  const std::vector<double> ones(p.size(), 1.0);
  return loss_detail::iou_of_mapped(p, ones, y, with_grad);
}

/// L = 1 - 2|py| / (|p| + |y|), with L(0, 0) = 0.
inline LossReport dice_loss(std::span<const double> p, std::span<const double> y, bool with_grad = true) {
  loss_detail::check_fields(p, y);
  const std::size_t n = p.size();
  std::vector<double> py(n);
  for (std::size_t k = 0; k < n; ++k) py[k] = p[k] * y[k];
  const double I = pairwise_sum(py);
  const double S = pairwise_sum(p) + pairwise_sum(y);
  LossReport r;
  if (S <= 0.0) {
    if (with_grad) r.gradient = std::vector<double>(n, 0.0);
    return r;
  }
  r.value = std::clamp(1.0 - 2.0 * I / S, 0.0, 1.0);
  if (with_grad) {
    std::vector<double> g(n);
    const double inv = 1.0 / (S * S);
    for (std::size_t k = 0; k < n; ++k) g[k] = -2.0 * (y[k] * S - I) * inv;
    r.gradient = std::move(g);
  }
  return r;
}

/// IOU loss with p_k replaced by p_k^m. m = 1 is iou_loss.
inline LossReport iou_loss_power(std::span<const double> p, std::span<const double> y, double m,
                                 bool with_grad = true) {
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("iou_loss_power: m must be > 0");
  loss_detail::check_fields(p, y);
  std::vector<double> q(p.size()), dq(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    q[k] = m == 1.0 ? p[k] : std::pow(p[k], m);
    dq[k] = m == 1.0 ? 1.0 : m * std::pow(p[k], m - 1.0);
  }
  return loss_detail::iou_of_mapped(q, dq, y, with_grad);
}

/// Smooth increasing map on [0, 1] with f(0) = 0 and f(1) = 1.
struct MonotoneMap {
  std::function<double(double)> f;
  std::function<double(double)> df;  ///< optional; no gradient without it

  static MonotoneMap identity() {
    return {[](double t) { return t; }, [](double) { return 1.0; }};
  }
  static MonotoneMap power(double m) {
    return {[m](double t) { return std::pow(t, m); }, [m](double t) { return m * std::pow(t, m - 1.0); }};
  }
  static MonotoneMap smoothstep() {
    return {[](double t) { return t * t * (3.0 - 2.0 * t); }, [](double t) { return 6.0 * t * (1.0 - t); }};
  }
};

/// IOU loss with p_k replaced by f_k(p_k). `maps` holds one map for every index, or a single
/// map applied to all of them.
inline LossReport iou_loss_general(std::span<const double> p, std::span<const double> y,
                                   std::span<const MonotoneMap> maps, bool with_grad = true) {
  loss_detail::check_fields(p, y);
  if (maps.size() != 1 && maps.size() != p.size())
    throw InvalidArgument("iou_loss_general: need one map or one per index");
  for (const auto& m : maps) {
    if (!m.f) throw InvalidArgument("iou_loss_general: map has no function");
    if (std::abs(m.f(0.0)) > 1e-12 || std::abs(m.f(1.0) - 1.0) > 1e-12)
      throw InvalidArgument("iou_loss_general: maps must satisfy f(0) = 0 and f(1) = 1");
  }
  const bool grad = with_grad && std::all_of(maps.begin(), maps.end(), [](const auto& m) { return bool(m.df); });
  std::vector<double> q(p.size()), dq(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto& m = maps.size() == 1 ? maps[0] : maps[k];
    q[k] = m.f(p[k]);
    if (grad) dq[k] = m.df(p[k]);
  }
  return loss_detail::iou_of_mapped(q, dq, y, grad);
}

/// (1/n) sum_k weight_k * L_k(p_k) with L_k the binary cross-entropy and w = mean(y).
/// Probabilities are clipped to [1e-7, 1 - 1e-7] before the log.
inline LossReport weighted_cross_entropy(std::span<const double> p, std::span<const double> y,
                                         CrossEntropyWeights mode = CrossEntropyWeights::frequency,
                                         bool with_grad = true) {
  loss_detail::check_fields(p, y);
  const std::size_t n = p.size();
  LossReport r;
  if (n == 0) return r;
  const double w = pairwise_sum(y) / static_cast<double>(n);
  std::vector<double> terms(n);
  std::vector<double> g(with_grad ? n : 0);
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = mode == CrossEntropyWeights::frequency ? w : 1.0 - w;
    const double weight = (1.0 - y[k]) * (1.0 - pos) + y[k] * pos;
    const double pc = std::clamp(p[k], kProbabilityClip, 1.0 - kProbabilityClip);
    terms[k] = -weight * (y[k] * std::log(pc) + (1.0 - y[k]) * std::log(1.0 - pc));
    if (with_grad) {
      const bool clipped = p[k] != pc;
      g[k] = clipped ? 0.0 : weight * (-y[k] / pc + (1.0 - y[k]) / (1.0 - pc)) / static_cast<double>(n);
    }
  }
  r.value = pairwise_sum(terms) / static_cast<double>(n);
  if (with_grad) r.gradient = std::move(g);
  return r;
}

struct LossOptions {
  double power = 1.0;  ///< for iou_power
  CrossEntropyWeights weights = CrossEntropyWeights::frequency;
  bool with_grad = true;
};

inline LossReport evaluate_loss(LossKind kind, std::span<const double> p, std::span<const double> y,
                                const LossOptions& opt = {}) {
  switch (kind) {
    case LossKind::iou: return iou_loss(p, y, opt.with_grad);
    case LossKind::dice: return dice_loss(p, y, opt.with_grad);
    case LossKind::iou_power: return iou_loss_power(p, y, opt.power, opt.with_grad);
    case LossKind::wce: return weighted_cross_entropy(p, y, opt.weights, opt.with_grad);
  }
  throw InvalidArgument("unknown loss kind");
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "iou") return LossKind::iou;
  if (s == "dice") return LossKind::dice;
  if (s == "iou-pow") return LossKind::iou_power;
  if (s == "wce") return LossKind::wce;
  throw InvalidArgument("unknown loss kind '" + s + "'");
}

/// Unweighted mean over classes of the per-class binary loss, comparing class c's
/// probabilities with the indicator (labels == c). Probabilities must sum to 1 per voxel.
inline LossReport multiclass_loss(const std::vector<std::vector<double>>& class_probs,
                                  std::span<const std::uint8_t> labels, LossKind base, const LossOptions& opt = {}) {
  const std::size_t nc = class_probs.size();
  if (nc == 0) throw InvalidArgument("multiclass_loss: no classes");
  const std::size_t n = labels.size();
  for (const auto& pc : class_probs)
    if (pc.size() != n) throw InvalidArgument("multiclass_loss: length mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] >= nc) throw InvalidArgument("multiclass_loss: label code out of range");
    double s = 0.0;
    for (const auto& pc : class_probs) s += pc[k];
    if (std::abs(s - 1.0) > 1e-5) throw InvalidArgument("multiclass_loss: probabilities do not sum to 1");
  }
  LossOptions o = opt;
  o.with_grad = false;
  LossReport r;
  std::vector<double> values(nc);
  std::vector<double> y(n);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t k = 0; k < n; ++k) y[k] = labels[k] == c ? 1.0 : 0.0;
    values[c] = evaluate_loss(base, class_probs[c], y, o).value;
    r.per_class[c] = values[c];
  }
  r.value = pairwise_sum(values) / static_cast<double>(nc);
  return r;
}

/// Binary Dice score 2|A n B| / (|A| + |B|); 1 when both are empty.
inline double dice_score(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) throw InvalidArgument("dice_score: dims differ");
  std::size_t inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    sa += a[i] != 0;
    sb += b[i] != 0;
  }
  return sa + sb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

}  // namespace vf
