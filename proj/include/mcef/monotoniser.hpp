#pragma once

#include <vector>

#include "mcef/design_model.hpp"
#include "mcef/numerics.hpp"

namespace mcef {

/// Maximal interval ]d_l, d_u] on which the weight curve strictly decreases.
struct DecreasingInterval {
  double d_l = 0.0;
  double d_u = 0.0;
};

/// Constant stretch [lo, hi] at the given level, replacing the base curve.
struct Plateau {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
};

/// A base curve overlaid with constant plateaus. The flattening procedure
/// below produces instances whose evaluation is non-decreasing across the
/// whole continuation region, equals the base curve off the plateaus, and on
/// each plateau equals the phi-weighted mean of the base curve over it.
class MonotoneQ {
 public:
  MonotoneQ(Curve base, ContinuationRegion region);

  double operator()(double z) const;
  const std::vector<Plateau>& plateaus() const { return plateaus_; }
  const Curve& base() const { return base_; }
  const ContinuationRegion& region() const { return region_; }

  /// Abscissae where evaluation is not smooth: base kinks plus plateau edges.
  std::vector<double> split_points() const;

  /// The overlay packaged as a Curve (kinks = split_points()).
  Curve as_curve() const;

  /// Installs a plateau, absorbing any existing plateau it fully covers.
  /// Partial overlap is a construction error.
  void apply_plateau(const Plateau& p);

 private:
  Curve base_;
  ContinuationRegion region_;
  std::vector<Plateau> plateaus_;  // sorted, disjoint, levels increasing
};

/// Maximal intervals of strict decrease of Q over the continuation region,
/// located analytically from the sign of dQ/dz (at most one arises for the
/// two estimate rules, but downstream code handles any count).
std::vector<DecreasingInterval> find_decreasing_intervals(
    const DesignSpec& spec, const ContinuationRegion& region);

struct FlattenStep {
  MonotoneQ curve;
  double q_level;
};

/// One induction step: levels the curve across the decreasing interval dk,
/// clipping the earlier curve from below-left and the base curve up-right of
/// it, at the constant chosen so the phi-weighted mass of the result up to
/// next_bound matches that of the base curve. Among numerically
/// indistinguishable solutions the largest constant is returned.
FlattenStep flatten_step(const MonotoneQ& prev, const DecreasingInterval& dk,
                         double next_bound, const Tolerance& tol = {});

/// Applies flatten_step across all decreasing intervals of the spec's Q.
MonotoneQ monotonise(const DesignSpec& spec, const ContinuationRegion& region,
                     const Tolerance& tol = {});

/// Same induction for an arbitrary base curve with caller-supplied intervals
/// (the curve must be non-decreasing between and after them).
MonotoneQ monotonise_curve(Curve base, const ContinuationRegion& region,
                           const std::vector<DecreasingInterval>& intervals,
                           const Tolerance& tol = {});

/// Non-decreasing least-squares fit of `values` with the given positive
/// weights (pool-adjacent-violators). Independent cross-check for the
/// flattening above; shares nothing with it but the normal pdf.
std::vector<double> weighted_pava(const std::vector<double>& values,
                                  const std::vector<double>& weights);

struct PavaResult {
  std::vector<double> grid;
  std::vector<double> fitted;
};

/// Discretized isotonic projection of Q on a uniform midpoint grid with
/// weights phi(z_i) * grid_step. Requires at least 1000 grid points.
PavaResult pava_reference(const DesignSpec& spec,
                          const ContinuationRegion& region, double grid_step);

/// Right-continuous step function: value is values[k] on the piece
/// [breaks[k-1], breaks[k]), with values.front() left of all breaks and
/// values.back() from the last break on.
struct StepFunction {
  std::vector<double> breaks;
  std::vector<double> values;  // size == breaks.size() + 1

  double operator()(double x) const;
  void validate() const;
  bool non_increasing() const;
  bool nonnegative() const;
};

struct Lemma1Result {
  double ineq_slack;  // int eta*Q*phi - int eta*Qtilde*phi  (>= 0 expected)
  double eq_gap;      // |int xi(Qtilde)*Q*phi - int xi(Qtilde)*Qtilde*phi|
};

/// Checks the two exchange identities the flattening guarantees: for
/// non-increasing nonnegative eta(z) the flattened curve never gains weighted
/// mass, and for any step function xi of the flattened value the weighted
/// means of Q and its flattening agree exactly.
Lemma1Result verify_lemma1(const MonotoneQ& mono, const StepFunction& eta,
                           const StepFunction& xi_of_value,
                           const Tolerance& tol = {});

Lemma1Result verify_lemma1(const DesignSpec& spec,
                           const ContinuationRegion& region,
                           const StepFunction& eta,
                           const StepFunction& xi_of_value,
                           const Tolerance& tol = {});

}  // namespace mcef
