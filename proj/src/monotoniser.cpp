#include "mcef/monotoniser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mcef/errors.hpp"

namespace mcef {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

const Tolerance kCrossingTol{1e-15, 1e-15, 300};

}  // namespace

MonotoneQ::MonotoneQ(Curve base, ContinuationRegion region)
    : base_(std::move(base)), region_(region) {}

double MonotoneQ::operator()(double z) const {
  auto it = std::lower_bound(
      plateaus_.begin(), plateaus_.end(), z,
      [](const Plateau& p, double v) { return p.hi < v; });
  if (it != plateaus_.end() && it->lo <= z) return it->level;
  return base_.value(z);
}

std::vector<double> MonotoneQ::split_points() const {
  std::vector<double> pts = base_.kinks;
  for (const Plateau& p : plateaus_) {
    pts.push_back(p.lo);
    pts.push_back(p.hi);
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

Curve MonotoneQ::as_curve() const {
  Curve c;
  c.value = [copy = *this](double z) { return copy(z); };
  c.kinks = split_points();
  return c;
}

void MonotoneQ::apply_plateau(const Plateau& p) {
  if (!(p.lo < p.hi))
    throw NumericalError("degenerate plateau [" + fmt(p.lo) + ", " + fmt(p.hi) + "]");
  std::vector<Plateau> kept;
  kept.reserve(plateaus_.size() + 1);
  for (const Plateau& q : plateaus_) {
    const bool covered = q.lo >= p.lo - 1e-12 && q.hi <= p.hi + 1e-12;
    if (covered) continue;
    const bool disjoint = q.hi <= p.lo || q.lo >= p.hi;
    if (!disjoint)
      throw NumericalError("plateau [" + fmt(p.lo) + ", " + fmt(p.hi) +
                           "] partially overlaps [" + fmt(q.lo) + ", " +
                           fmt(q.hi) + "]");
    kept.push_back(q);
  }
  kept.push_back(p);
  std::sort(kept.begin(), kept.end(),
            [](const Plateau& a, const Plateau& b) { return a.lo < b.lo; });
  plateaus_ = std::move(kept);
}

std::vector<DecreasingInterval> find_decreasing_intervals(
    const DesignSpec& spec, const ContinuationRegion& region) {
  spec.validate();
  const double theta = spec.drift();
  std::vector<DecreasingInterval> out;
  const auto add_clipped = [&](double lo, double hi) {
    lo = std::max(lo, region.z_lo);
    hi = std::min(hi, region.z_hi);
    if (lo < hi) out.push_back({lo, hi});
  };

  if (spec.estimate_rule == EstimateRule::fixed) {
    if (theta < 0.0) add_clipped(region.z_lo, region.z_hi);
    return out;
  }

  const double kink = spec.truncation_kink();
  if (theta < 0.0) {
    // decreasing below the kink (sign theta) and above it (theta - 1/z < 0)
    add_clipped(region.z_lo, region.z_hi);
  } else if (theta == 0.0) {
    // constant below the kink, strictly decreasing above it
    add_clipped(kink, region.z_hi);
  } else {
    // increasing below the kink; above it the sign of theta - 1/z flips at 1/theta
    if (kink < 1.0 / theta) add_clipped(kink, 1.0 / theta);
  }
  return out;
}

namespace {

struct ClipBounds {
  double lo;  // where the constant stretch begins
  double hi;  // where it ends
};

// Locates where the level q meets the previous curve left of d_l and the base
// curve right of d_u. Both curves are non-decreasing on the scanned ranges,
// so each crossing is found by bracketed root finding on one monotone piece.
ClipBounds clip_bounds(const MonotoneQ& prev, double q,
                       const DecreasingInterval& dk, double next_bound) {
  const Curve& base = prev.base();
  const double z_lo = prev.region().z_lo;

  double A = dk.d_l;
  if (prev(dk.d_l) > q && z_lo < dk.d_l) {
    // The previous curve is continuous and non-decreasing up to d_l, so the
    // level q is first reached either inside a base segment (bracketed root)
    // or at a plateau's left edge; walk the pieces left to right.
    bool found = false;
    double seg_start = z_lo;
    const auto scan_segment = [&](double s, double e) {
      if (found || !(s < e)) return;
      if (base.value(e) < q) return;
      A = base.value(s) >= q
              ? s
              : find_root([&](double z) { return base.value(z) - q; }, s, e,
                          kCrossingTol);
      found = true;
    };
    for (const Plateau& p : prev.plateaus()) {
      if (p.lo >= dk.d_l) break;
      scan_segment(seg_start, std::min(p.lo, dk.d_l));
      if (!found && p.level >= q) {
        A = p.lo;
        found = true;
      }
      seg_start = p.hi;
      if (found) break;
    }
    if (!found) scan_segment(seg_start, dk.d_l);
    if (!found)
      throw NumericalError(
          "flatten_step: left clip point not bracketed at level " + fmt(q));
  }

  double B = dk.d_u;
  if (dk.d_u < next_bound) {
    if (base.value(next_bound) <= q)
      B = next_bound;
    else if (base.value(dk.d_u) >= q)
      B = dk.d_u;
    else
      B = find_root([&](double z) { return base.value(z) - q; }, dk.d_u,
                    next_bound, kCrossingTol);
  }
  return {A, B};
}

}  // namespace

FlattenStep flatten_step(const MonotoneQ& prev, const DecreasingInterval& dk,
                         double next_bound, const Tolerance& tol) {
  tol.validate();
  const ContinuationRegion& region = prev.region();
  if (!(region.z_lo <= dk.d_l && dk.d_l < dk.d_u && dk.d_u <= next_bound &&
        next_bound <= region.z_hi + 1e-12))
    throw ValidationError("flatten_step: interval ]" + fmt(dk.d_l) + ", " +
                          fmt(dk.d_u) + "] / bound " + fmt(next_bound) +
                          " not ordered within the region");
  const Curve& base = prev.base();
  const Tolerance quad_tol{std::min(tol.abs_tol, 1e-12), 1e-12, tol.max_iter};

  // Mass balance is local: outside [A(q), B(q)] the new curve matches the old
  // one, and earlier plateaus already hold their own weighted means. The
  // residual is r(q) = q * mass(A,B) - int_A^B Q phi, increasing in q.
  const auto base_mass = [&](double a, double b) {
    return integrate_with_breaks(
        [&](double z) { return base.value(z) * std_normal_pdf(z); }, a, b,
        base.kinks, quad_tol);
  };
  const auto residual_at = [&](double q, const ClipBounds& cb) {
    return q * phi_mass(cb.lo, cb.hi) - base_mass(cb.lo, cb.hi);
  };
  const auto residual = [&](double q) {
    return residual_at(q, clip_bounds(prev, q, dk, next_bound));
  };

  // Upper bracket: the base curve's maximum over the prefix dominates every
  // feasible level; doubling guards against sampling error.
  double q_hi = 0.0;
  {
    const int n = 257;
    for (int i = 0; i < n; ++i) {
      const double z = region.z_lo + (next_bound - region.z_lo) * i / (n - 1);
      q_hi = std::max(q_hi, base.value(z));
    }
    for (double z : base.kinks)
      if (z >= region.z_lo && z <= next_bound)
        q_hi = std::max(q_hi, base.value(z));
    q_hi *= 1.0000001;
    int guard = 0;
    while (residual(q_hi) < 0.0) {
      q_hi *= 2.0;
      if (++guard > 64)
        throw NumericalError("flatten_step: failed to bracket the level");
    }
  }

  double q = find_root(residual, 0.0, q_hi, Tolerance{1e-12, 1e-12, 300});

  // Newton polish: the exact level is the phi-weighted mean of the base curve
  // over its own clip window, a fixed point reached quadratically.
  ClipBounds cb = clip_bounds(prev, q, dk, next_bound);
  for (int it = 0; it < 60; ++it) {
    const double mass = phi_mass(cb.lo, cb.hi);
    if (!(mass > 0.0)) break;
    const double mean = base_mass(cb.lo, cb.hi) / mass;
    const bool done = std::fabs(mean - q) <= 8e-16 * std::max(1.0, std::fabs(q));
    q = mean;
    cb = clip_bounds(prev, q, dk, next_bound);
    if (done) break;
  }

  // The solution set of |r| <= tol has positive width when the clip window
  // carries little mass; honor the "largest level" convention by walking to
  // its right edge, capped so the plateau mean stays within tolerance.
  {
    const double cap =
        std::min(tol.abs_tol,
                 phi_mass(cb.lo, cb.hi) * 2e-10 * std::max(1.0, std::fabs(q)));
    double step = std::max(1e-13, 4e-16 * std::fabs(q));
    int guard = 0;
    while (guard++ < 120) {
      const double probe = q + step;
      if (residual(probe) > cap) break;
      q = probe;
      step *= 2.0;
    }
    cb = clip_bounds(prev, q, dk, next_bound);
  }

  MonotoneQ next = prev;
  next.apply_plateau({cb.lo, cb.hi, q});
  return {std::move(next), q};
}

MonotoneQ monotonise_curve(Curve base, const ContinuationRegion& region,
                           const std::vector<DecreasingInterval>& intervals,
                           const Tolerance& tol) {
  MonotoneQ cur(std::move(base), region);
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const double next_bound =
        k + 1 < intervals.size() ? intervals[k + 1].d_l : region.z_hi;
    FlattenStep step = flatten_step(cur, intervals[k], next_bound, tol);
    cur = std::move(step.curve);
  }
  return cur;
}

MonotoneQ monotonise(const DesignSpec& spec, const ContinuationRegion& region,
                     const Tolerance& tol) {
  return monotonise_curve(raw_q_curve(spec), region,
                          find_decreasing_intervals(spec, region), tol);
}

std::vector<double> weighted_pava(const std::vector<double>& values,
                                  const std::vector<double>& weights) {
  if (values.size() != weights.size())
    throw ValidationError("weighted_pava: values/weights size mismatch");
  struct Block {
    double w, mean;
    std::size_t n;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw ValidationError("weighted_pava: weights must be positive");
    blocks.push_back({weights[i], values[i], 1});
    // Pool only strict violations; comparing stored means directly keeps
    // already-isotonic stretches bit-for-bit untouched.
    while (blocks.size() >= 2 &&
           blocks[blocks.size() - 1].mean < blocks[blocks.size() - 2].mean) {
      const Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double w = a.w + b.w;
      a.mean = (a.w * a.mean + b.w * b.mean) / w;
      a.w = w;
      a.n += b.n;
    }
  }
  std::vector<double> fitted;
  fitted.reserve(values.size());
  for (const Block& b : blocks) fitted.insert(fitted.end(), b.n, b.mean);
  return fitted;
}

PavaResult pava_reference(const DesignSpec& spec,
                          const ContinuationRegion& region, double grid_step) {
  spec.validate();
  if (!(grid_step > 0.0))
    throw ValidationError("grid_step must be positive");
  const auto n = static_cast<std::size_t>(region.width() / grid_step);
  if (n < 1000)
    throw ValidationError("grid_step " + fmt(grid_step) +
                          " yields fewer than 1000 grid points");
  PavaResult res;
  res.grid.reserve(n);
  std::vector<double> values, weights;
  values.reserve(n);
  weights.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = region.z_lo + (i + 0.5) * grid_step;
    res.grid.push_back(z);
    values.push_back(q_function(z, spec));
    weights.push_back(std_normal_pdf(z) * grid_step);
  }
  res.fitted = weighted_pava(values, weights);
  return res;
}

double StepFunction::operator()(double x) const {
  const auto k = static_cast<std::size_t>(
      std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin());
  return values[k];
}

void StepFunction::validate() const {
  if (values.size() != breaks.size() + 1)
    throw ValidationError("StepFunction: need breaks.size()+1 values");
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i - 1] < breaks[i]))
      throw ValidationError("StepFunction: breaks must be strictly ascending");
}

bool StepFunction::non_increasing() const {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1]) return false;
  return true;
}

bool StepFunction::nonnegative() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return v >= 0.0; });
}

namespace {

// z-locations where the flattened curve crosses the value u; pieces between
// plateaus are monotone stretches of the base curve.
std::vector<double> level_crossings(const MonotoneQ& mono, double u) {
  std::vector<double> out;
  const Curve& base = mono.base();
  const ContinuationRegion& region = mono.region();
  double seg_start = region.z_lo;
  const auto scan = [&](double s, double e) {
    if (!(s < e)) return;
    const double vs = base.value(s), ve = base.value(e);
    if ((vs - u) * (ve - u) < 0.0)
      out.push_back(find_root([&](double z) { return base.value(z) - u; }, s, e,
                              kCrossingTol));
  };
  for (const Plateau& p : mono.plateaus()) {
    scan(seg_start, p.lo);
    seg_start = p.hi;
  }
  scan(seg_start, region.z_hi);
  return out;
}

}  // namespace

Lemma1Result verify_lemma1(const MonotoneQ& mono, const StepFunction& eta,
                           const StepFunction& xi_of_value,
                           const Tolerance& tol) {
  eta.validate();
  xi_of_value.validate();
  if (!eta.non_increasing() || !eta.nonnegative())
    throw ValidationError("eta must be non-increasing and nonnegative");

  const ContinuationRegion& region = mono.region();
  const Curve& base = mono.base();
  const Tolerance quad_tol{std::min(tol.abs_tol, 1e-11), 1e-11, tol.max_iter};

  std::vector<double> splits = mono.split_points();
  splits.insert(splits.end(), eta.breaks.begin(), eta.breaks.end());
  const double i_eta_q = integrate_with_breaks(
      [&](double z) { return eta(z) * base.value(z) * std_normal_pdf(z); },
      region.z_lo, region.z_hi, splits, quad_tol);
  const double i_eta_mono = integrate_with_breaks(
      [&](double z) { return eta(z) * mono(z) * std_normal_pdf(z); },
      region.z_lo, region.z_hi, splits, quad_tol);

  std::vector<double> xi_splits = mono.split_points();
  for (double u : xi_of_value.breaks) {
    const std::vector<double> cr = level_crossings(mono, u);
    xi_splits.insert(xi_splits.end(), cr.begin(), cr.end());
  }
  const double i_xi_q = integrate_with_breaks(
      [&](double z) {
        return xi_of_value(mono(z)) * base.value(z) * std_normal_pdf(z);
      },
      region.z_lo, region.z_hi, xi_splits, quad_tol);
  const double i_xi_mono = integrate_with_breaks(
      [&](double z) { return xi_of_value(mono(z)) * mono(z) * std_normal_pdf(z); },
      region.z_lo, region.z_hi, xi_splits, quad_tol);

  return {i_eta_q - i_eta_mono, std::fabs(i_xi_q - i_xi_mono)};
}

Lemma1Result verify_lemma1(const DesignSpec& spec,
                           const ContinuationRegion& region,
                           const StepFunction& eta,
                           const StepFunction& xi_of_value,
                           const Tolerance& tol) {
  return verify_lemma1(monotonise(spec, region, tol), eta, xi_of_value, tol);
}

}  // namespace mcef
