#include "mcef/ce_optimal.hpp"

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

void require_in_region(double z1, const ContinuationRegion& region) {
  if (!(z1 >= region.z_lo - 1e-12 && z1 <= region.z_hi + 1e-12))
    throw ValidationError("z1=" + fmt(z1) + " outside the continuation region ]" +
                          fmt(region.z_lo) + ", " + fmt(region.z_hi) + "]");
}

double positive_curve_value(const Curve& curve, double z1) {
  const double q = curve.value(z1);
  if (!(q > 0.0) || !std::isfinite(q))
    throw NumericalError("weight curve must be positive and finite, got " +
                         fmt(q) + " at z1=" + fmt(z1));
  return q;
}

}  // namespace

double ce_value(const CEFunction& cef, double z1) {
  require_in_region(z1, cef.region);
  const double q = positive_curve_value(cef.curve, z1);
  return psi(-std::exp(cef.c) / q, cef.ctx);
}

double CEFunction::operator()(double z1) const { return ce_value(*this, z1); }

double level(const CEFunction& cef, const Tolerance& tol) {
  return integrate_with_breaks(
      [&](double z) { return ce_value(cef, z) * std_normal_pdf(z); },
      cef.region.z_lo, cef.region.z_hi, cef.curve.kinks, tol);
}

CalibrationResult calibrate(const Curve& curve, const DesignSpec& spec,
                            const Tolerance& tol) {
  spec.validate();
  tol.validate();
  const double target = spec.alpha - spec.alpha1;
  const double attainable = (1.0 - spec.beta_c) * (spec.alpha0 - spec.alpha1);
  if (!(target < attainable))
    throw ValidationError(
        "level target alpha - alpha1 = " + fmt(target) +
        " is not attainable; the supremum over this family is (1 - beta_c) * "
        "(alpha0 - alpha1) = " +
        fmt(attainable));

  CEFunction probe{curve, 0.0, make_psi_context(spec.beta_c),
                   continuation_region(spec)};
  int evals = 0;
  const auto excess = [&](double c) {
    probe.c = c;
    ++evals;
    return level(probe, tol) - target;
  };

  // level is strictly decreasing in c, from the attainable supremum down to 0
  double lo = 0.0, hi = 0.0;
  double g_lo = excess(0.0), g_hi = g_lo;
  for (double step = 1.0; g_lo < 0.0; step *= 2.0) {
    hi = lo;
    g_hi = g_lo;
    lo -= step;
    g_lo = excess(lo);
    if (step > 1e18)
      throw NumericalError("calibration bracket expansion ran away (low side)");
  }
  for (double step = 1.0; g_hi > 0.0; step *= 2.0) {
    lo = hi;
    g_lo = g_hi;
    hi += step;
    g_hi = excess(hi);
    if (step > 1e18)
      throw NumericalError("calibration bracket expansion ran away (high side)");
  }

  const double c_alpha =
      find_root(excess, lo, hi, Tolerance{1e-12, 1e-12, tol.max_iter});
  probe.c = c_alpha;
  const double achieved = level(probe, tol);
  if (std::fabs(achieved - target) > std::max(tol.abs_tol, 1e-10))
    throw NumericalError("calibration residual " + fmt(achieved - target) +
                         " exceeds tolerance");
  return {c_alpha, achieved, evals};
}

CEFunction make_ce(const Curve& curve, const DesignSpec& spec,
                   const Tolerance& tol) {
  const CalibrationResult cal = calibrate(curve, spec, tol);
  return {curve, cal.c_alpha, make_psi_context(spec.beta_c),
          continuation_region(spec)};
}

CEFunction optimal_monotone_ce(const DesignSpec& spec, const Tolerance& tol) {
  const ContinuationRegion region = continuation_region(spec);
  return make_ce(monotonise(spec, region, tol).as_curve(), spec, tol);
}

CEFunction unconstrained_ce(const DesignSpec& spec, const Tolerance& tol) {
  return make_ce(raw_q_curve(spec), spec, tol);
}

double objective(const std::function<double(double)>& ce,
                 const std::vector<double>& ce_kinks, const DesignSpec& spec,
                 const Tolerance& tol) {
  spec.validate();
  const ContinuationRegion region = continuation_region(spec);
  const PsiContext ctx = make_psi_context(spec.beta_c);
  std::vector<double> splits = ce_kinks;
  if (spec.estimate_rule == EstimateRule::truncated_observed)
    splits.push_back(spec.truncation_kink());
  return integrate_with_breaks(
      [&](double z) {
        return nu2(ce(z), ctx) * q_function(z, spec) * std_normal_pdf(z);
      },
      region.z_lo, region.z_hi, splits, tol);
}

double objective(const CEFunction& cef, const DesignSpec& spec,
                 const Tolerance& tol) {
  return objective([&](double z) { return ce_value(cef, z); }, cef.curve.kinks,
                   spec, tol);
}

double second_stage_n(const CEFunction& cef, double z1, const DesignSpec& spec) {
  require_in_region(z1, cef.region);
  const double q = positive_curve_value(cef.curve, z1);
  const double z_crit = psi_critical_z(-std::exp(cef.c) / q, cef.ctx);
  const double d = z_crit - cef.ctx.z_target;
  const double est = interim_estimate(z1, spec);
  return 2.0 * d * d / (est * est);
}

double expected_sample_size(const CEFunction& cef, const DesignSpec& spec,
                            double effect, const Tolerance& tol) {
  spec.validate();
  const double drift = std::sqrt(0.5 * spec.n1) * effect;
  std::vector<double> splits = cef.curve.kinks;
  if (spec.estimate_rule == EstimateRule::truncated_observed)
    splits.push_back(spec.truncation_kink());
  return spec.n1 + integrate_with_breaks(
                       [&](double z) {
                         return second_stage_n(cef, z, spec) *
                                std_normal_pdf(z - drift);
                       },
                       cef.region.z_lo, cef.region.z_hi, splits, tol);
}

}  // namespace mcef
