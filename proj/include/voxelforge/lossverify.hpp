#pragma once

// Checks of the loss functions' mathematical properties: metric axioms on binary vectors,
// the restriction bound, the false-positive/false-negative penalty formulas, and analytic
// gradients against finite differences.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "voxelforge/random.hpp"
#include "voxelforge/segloss.hpp"

namespace vf {

using BinaryVector = std::vector<double>;

struct MetricCounterexample {
  std::string property;  ///< "symmetry", "identity" or "triangle"
  BinaryVector p, y, r;  ///< triangle: L(p,y) > L(p,r) + L(r,y)
  double lhs = 0.0, rhs = 0.0;
};

struct MetricReport {
  bool pass = true;
  std::size_t triples = 0;
  std::optional<MetricCounterexample> counterexample;
};

namespace verify_detail {

/// Element 0 is the most significant bit, so codes enumerate vectors lexicographically.
inline BinaryVector decode(unsigned code, unsigned n) {
  BinaryVector v(n);
  for (unsigned k = 0; k < n; ++k) v[k] = (code >> (n - 1 - k)) & 1u ? 1.0 : 0.0;
  return v;
}

inline double binary_loss(LossKind kind, const BinaryVector& a, const BinaryVector& b) {
  return evaluate_loss(kind, a, b, {.with_grad = false}).value;
}

}  // namespace verify_detail

/// Exhaustively checks symmetry, identity of indiscernibles and the triangle inequality of a
/// binary loss over all triples of binary vectors of every length 1..n_max.
/// Stops at the first failure, scanning lengths upward and (p, y, r) lexicographically.
inline MetricReport check_jaccard_metric(unsigned n_max, LossKind kind = LossKind::iou) {
  using namespace verify_detail;
  if (n_max < 1 || n_max > 6) throw InvalidArgument("check_jaccard_metric: n_max must be in [1, 6]");
  MetricReport rep;
  for (unsigned n = 1; n <= n_max; ++n) {
    const unsigned m = 1u << n;
    std::vector<BinaryVector> vecs;
    for (unsigned c = 0; c < m; ++c) vecs.push_back(decode(c, n));
    std::vector<double> L(m * m);
    for (unsigned a = 0; a < m; ++a)
      for (unsigned b = 0; b < m; ++b) L[a * m + b] = binary_loss(kind, vecs[a], vecs[b]);
    for (unsigned a = 0; a < m; ++a)
      for (unsigned b = 0; b < m; ++b) {
        const double lab = L[a * m + b];
        if (lab != L[b * m + a]) {
          rep.pass = false;
          rep.counterexample = MetricCounterexample{"symmetry", vecs[a], vecs[b], {}, lab, L[b * m + a]};
          return rep;
        }
        if ((lab == 0.0) != (a == b)) {
          rep.pass = false;
          rep.counterexample = MetricCounterexample{"identity", vecs[a], vecs[b], {}, lab, 0.0};
          return rep;
        }
        for (unsigned c = 0; c < m; ++c) {
          ++rep.triples;
          const double rhs = L[a * m + c] + L[c * m + b];
          if (lab > rhs + 1e-12) {
            rep.pass = false;
            rep.counterexample = MetricCounterexample{"triangle", vecs[a], vecs[b], vecs[c], lab, rhs};
            return rep;
          }
        }
      }
  }
  return rep;
}

/// Monte Carlo triangle-inequality check for longer vectors.
inline MetricReport sample_jaccard_metric(unsigned n, std::size_t samples, std::uint64_t seed,
                                          LossKind kind = LossKind::iou) {
  CounterStream rng(seed);
  MetricReport rep;
  BinaryVector p(n), y(n), r(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (unsigned k = 0; k < n; ++k) {
      p[k] = rng.bernoulli(0.5);
      y[k] = rng.bernoulli(0.5);
      r[k] = rng.bernoulli(0.5);
    }
    ++rep.triples;
    const double lhs = verify_detail::binary_loss(kind, p, y);
    const double rhs = verify_detail::binary_loss(kind, p, r) + verify_detail::binary_loss(kind, r, y);
    if (lhs > rhs + 1e-12) {
      rep.pass = false;
      rep.counterexample = MetricCounterexample{"triangle", p, y, r, lhs, rhs};
      return rep;
    }
  }
  return rep;
}

struct RestrictionBound {
  double lhs = 0.0;  ///< L(p, g)
  double rhs = 0.0;  ///< L(p, p n s) + L(g n s, p n s) + L(g, g n s)
  bool holds = false;
};

/// Triangle-inequality bound on the loss change from restricting p and g to the support of s.
inline RestrictionBound restriction_bound(const BinaryVector& p, const BinaryVector& g, const BinaryVector& s) {
  if (p.size() != g.size() || p.size() != s.size()) throw InvalidArgument("restriction_bound: length mismatch");
  BinaryVector ps(p.size()), gs(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    ps[k] = p[k] * s[k];
    gs[k] = g[k] * s[k];
  }
  auto L = [](const BinaryVector& a, const BinaryVector& b) { return iou_loss(a, b, false).value; };
  RestrictionBound r;
  r.lhs = L(p, g);
  r.rhs = L(p, ps) + L(gs, ps) + L(g, gs);
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

struct PenaltyRow {
  std::size_t eps = 0;
  double fn = 0.0;              ///< eps / N
  double fp = 0.0;              ///< eps / (N + eps)
  double fn_constructed = 0.0;  ///< iou_loss of an explicit pure false-negative prediction
  double fp_constructed = 0.0;  ///< iou_loss of an explicit pure false-positive prediction
  bool agrees = false;          ///< both constructed values within 1e-12 of the formulas
};

/// Penalty of eps mispredicted voxels against N positives, by formula and by construction.
inline std::vector<PenaltyRow> penalty_curves(std::size_t N, const std::vector<std::size_t>& eps_list) {
  if (N < 1) throw InvalidArgument("penalty_curves: N must be >= 1");
  std::vector<PenaltyRow> rows;
  for (std::size_t eps : eps_list) {
    if (eps > N) throw InvalidArgument("penalty_curves: eps must not exceed N");
    PenaltyRow row;
    row.eps = eps;
    row.fn = static_cast<double>(eps) / static_cast<double>(N);
    row.fp = static_cast<double>(eps) / static_cast<double>(N + eps);
    // y: N positives followed by eps negatives.
    std::vector<double> y(N + eps, 0.0);
    std::fill_n(y.begin(), N, 1.0);
    std::vector<double> fn_pred = y;
    std::fill_n(fn_pred.begin(), eps, 0.0);
    std::vector<double> fp_pred(N + eps, 1.0);
    row.fn_constructed = iou_loss(fn_pred, y, false).value;
    row.fp_constructed = iou_loss(fp_pred, y, false).value;
    row.agrees = std::abs(row.fn_constructed - row.fn) <= 1e-12 && std::abs(row.fp_constructed - row.fp) <= 1e-12;
    rows.push_back(row);
  }
  return rows;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  bool pass = false;
};

/// Compares analytic gradients with finite differences (h = 1e-5; central, one-sided within h of
/// 0 or 1) at random (p, y) pairs with p drawn from [0.01, 0.99]^n and y nonempty.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport grad_check(LossKind kind, std::size_t trials, std::size_t n, double tol,
                                  const LossOptions& opt = {}, std::uint64_t seed = 1) {
  constexpr double h = 1e-5;
  CounterStream rng(seed);
  GradCheckReport rep;
  LossOptions value_only = opt;
  value_only.with_grad = false;
  LossOptions with_grad = opt;
  with_grad.with_grad = true;
  std::vector<double> p(n), y(n);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng.uniform(0.01, 0.99);
      y[k] = rng.bernoulli(0.3) ? 1.0 : 0.0;
    }
    if (n > 0) y[static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n)) % n] = 1.0;
    const auto analytic = *evaluate_loss(kind, p, y, with_grad).gradient;
    for (std::size_t k = 0; k < n; ++k) {
      const double orig = p[k];
      double numeric;
      auto f = [&](double v) {
        p[k] = v;
        return evaluate_loss(kind, p, y, value_only).value;
      };
      if (orig - h < 0.0) numeric = (f(orig + h) - f(orig)) / h;
      else if (orig + h > 1.0) numeric = (f(orig) - f(orig - h)) / h;
      else numeric = (f(orig + h) - f(orig - h)) / (2.0 * h);
      p[k] = orig;
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic[k] - numeric) / denom);
    }
    ++rep.trials;
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

}  // namespace vf
