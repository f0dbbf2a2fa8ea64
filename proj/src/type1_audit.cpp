#include "mcef/type1_audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcef/errors.hpp"
#include "mcef/nu_psi.hpp"

namespace mcef {

namespace {

double audit_drift(const DesignSpec& spec, double delta) {
  return std::sqrt(spec.n1 / 2.0) * delta;
}

void require_null_side(double delta) {
  if (!std::isfinite(delta) || delta > 0.0) {
    throw ValidationError(
        "type-one audit requires a finite nonpositive true effect, got " +
        std::to_string(delta));
  }
}

// The exchange inequality and the bound ladder are only valid for
// non-decreasing conditional error functions; probe on a fine grid.
void require_non_decreasing(const std::function<double(double)>& fn,
                            const ContinuationRegion& region,
                            const char* caller) {
  constexpr int kGridPoints = 2001;
  constexpr double kSlack = 1e-9;
  const double step = region.width() / (kGridPoints - 1);
  double prev = fn(region.z_lo);
  for (int i = 1; i < kGridPoints; ++i) {
    const double z = (i == kGridPoints - 1) ? region.z_hi
                                            : region.z_lo + i * step;
    const double cur = fn(z);
    if (!std::isfinite(cur)) {
      throw NumericalError(std::string(caller) +
                           ": conditional error function is not finite at z1=" +
                           std::to_string(z));
    }
    if (cur < prev - kSlack) {
      throw ValidationError(
          std::string(caller) +
          ": conditional error function decreases near z1=" +
          std::to_string(z) + " (drop " + std::to_string(prev - cur) + ")");
    }
    prev = std::max(prev, cur);
  }
}

Tolerance audit_tolerance(const Tolerance& tol) {
  Tolerance t = tol;
  t.abs_tol = std::min(tol.abs_tol, 1e-12);
  t.rel_tol = std::min(tol.rel_tol, 1e-12);
  t.validate();
  return t;
}

std::vector<double> with_estimate_kink(std::vector<double> kinks,
                                       const DesignSpec& spec) {
  if (spec.estimate_rule == EstimateRule::truncated_observed) {
    kinks.push_back(spec.truncation_kink());
  }
  return kinks;
}

double keyiq_core(const std::function<double(double)>& ce,
                  const std::vector<double>& kinks, const DesignSpec& spec,
                  double delta, const Tolerance& tol) {
  require_null_side(delta);
  const ContinuationRegion region = continuation_region(spec);
  require_non_decreasing(ce, region, "keyiq_check");
  const Tolerance qt = audit_tolerance(tol);
  const double theta = audit_drift(spec, delta);
  const double plain = integrate_with_breaks(
      [&](double z) { return ce(z) * std_normal_pdf(z); }, region.z_lo,
      region.z_hi, kinks, qt);
  const double shifted = integrate_with_breaks(
      [&](double z) { return ce(z) * std_normal_pdf(z - theta); }, region.z_lo,
      region.z_hi, kinks, qt);
  return pooled_q1(spec, delta) * plain - shifted;
}

// Rejection probability carried by the second stage: the design picks the
// second-stage size so that sqrt(n2/2)*estimate = z_crit - z_target (floored
// at zero once the target power is already met), and the second-stage
// statistic is normal with mean sqrt(n2/2)*delta.
double second_stage_term(double z_crit, double z_target, double estimate,
                         double delta, double z1, double theta) {
  const double root_half_n2 = std::max(0.0, z_crit - z_target) / estimate;
  return std_normal_cdf(root_half_n2 * delta - z_crit) *
         std_normal_pdf(z1 - theta);
}

double exact_core(const std::function<double(double)>& z_crit_of,
                  const std::vector<double>& kinks, const DesignSpec& spec,
                  double delta, const Tolerance& tol) {
  require_null_side(delta);
  const ContinuationRegion region = continuation_region(spec);
  const Tolerance qt = audit_tolerance(tol);
  const double theta = audit_drift(spec, delta);
  const double z_target = make_psi_context(spec.beta_c).z_target;
  const double first = std_normal_cdf(theta - region.z_hi);
  const double second = integrate_with_breaks(
      [&](double z) {
        const double z_crit = z_crit_of(z);
        if (std::isnan(z_crit)) return 0.0;  // zero conditional error
        return second_stage_term(z_crit, z_target, interim_estimate(z, spec),
                                 delta, z, theta);
      },
      region.z_lo, region.z_hi, with_estimate_kink(kinks, spec), qt);
  return first + second;
}

}  // namespace

double pooled_q1(const DesignSpec& spec, double delta) {
  spec.validate();
  require_null_side(delta);
  const ContinuationRegion region = continuation_region(spec);
  const double theta = audit_drift(spec, delta);
  return (std_normal_cdf(theta - region.z_lo) -
          std_normal_cdf(theta - region.z_hi)) /
         (spec.alpha0 - spec.alpha1);
}

double keyiq_check(const CEFunction& cef, const DesignSpec& spec, double delta,
                   const Tolerance& tol) {
  spec.validate();
  return keyiq_core([&](double z) { return cef(z); }, cef.curve.kinks, spec,
                    delta, tol);
}

double keyiq_check(const std::function<double(double)>& ce,
                   const std::vector<double>& ce_kinks, const DesignSpec& spec,
                   double delta, const Tolerance& tol) {
  spec.validate();
  return keyiq_core(ce, ce_kinks, spec, delta, tol);
}

double exact_rejection(const CEFunction& cef, const DesignSpec& spec,
                       double delta, const Tolerance& tol) {
  spec.validate();
  const double scale = std::exp(cef.c);
  auto z_crit_of = [&, scale](double z) {
    const double q = cef.curve(z);
    if (!std::isfinite(q) || q <= 0.0) {
      throw NumericalError(
          "exact_rejection: curve value must be positive and finite at z1=" +
          std::to_string(z));
    }
    return psi_critical_z(-scale / q, cef.ctx);
  };
  return exact_core(z_crit_of, cef.curve.kinks, spec, delta, tol);
}

double exact_rejection(const std::function<double(double)>& ce,
                       const std::vector<double>& ce_kinks,
                       const DesignSpec& spec, double delta,
                       const Tolerance& tol) {
  spec.validate();
  auto z_crit_of = [&](double z) {
    double u = ce(z);
    if (!std::isfinite(u) || u >= 1.0) {
      throw NumericalError(
          "exact_rejection: conditional error must be finite and below one "
          "at z1=" +
          std::to_string(z));
    }
    if (u <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return upper_quantile(u);
  };
  return exact_core(z_crit_of, ce_kinks, spec, delta, tol);
}

BoundChain bound_chain(const CEFunction& cef, const DesignSpec& spec,
                       double delta, const Tolerance& tol) {
  spec.validate();
  require_null_side(delta);
  const ContinuationRegion region = continuation_region(spec);
  require_non_decreasing([&](double z) { return cef(z); }, region,
                         "bound_chain");
  const Tolerance qt = audit_tolerance(tol);
  const double target = spec.alpha - spec.alpha1;
  const double achieved = integrate_with_breaks(
      [&](double z) { return cef(z) * std_normal_pdf(z); }, region.z_lo,
      region.z_hi, cef.curve.kinks, qt);
  if (std::abs(achieved - target) > 1e-6) {
    throw ValidationError(
        "bound_chain: conditional error function is not calibrated to the "
        "second-stage level " +
        std::to_string(target) + " (integral " + std::to_string(achieved) +
        ")");
  }
  const double theta = audit_drift(spec, delta);
  const double first = std_normal_cdf(theta - region.z_hi);
  const double shifted = integrate_with_breaks(
      [&](double z) { return cef(z) * std_normal_pdf(z - theta); },
      region.z_lo, region.z_hi, cef.curve.kinks, qt);
  const double width = spec.alpha0 - spec.alpha1;
  BoundChain chain;
  chain.b1 = first + shifted;
  chain.b2 = first + pooled_q1(spec, delta) * target;
  chain.b3 = spec.alpha1 * (spec.alpha0 - spec.alpha) / width +
             spec.alpha0 * (spec.alpha - spec.alpha1) / width;
  return chain;
}

std::vector<Type1Row> type1_scan(const CEFunction& cef, const DesignSpec& spec,
                                 const std::vector<double>& deltas,
                                 const Tolerance& tol) {
  spec.validate();
  const ContinuationRegion region = continuation_region(spec);
  std::vector<Type1Row> rows;
  rows.reserve(deltas.size());
  for (double delta : deltas) {
    require_null_side(delta);
    Type1Row row;
    row.delta = delta;
    row.first_stage_reject =
        std_normal_cdf(audit_drift(spec, delta) - region.z_hi);
    row.exact_total = exact_rejection(cef, spec, delta, tol);
    row.second_stage_mass = row.exact_total - row.first_stage_reject;
    row.bound_total =
        (delta == 0.0) ? spec.alpha : bound_chain(cef, spec, delta, tol).b2;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mcef
