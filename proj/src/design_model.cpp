#include "mcef/design_model.hpp"

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

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::string to_string(EstimateRule rule) {
  return rule == EstimateRule::fixed ? "fixed" : "truncated-observed";
}

EstimateRule estimate_rule_from_string(const std::string& s) {
  if (s == "fixed") return EstimateRule::fixed;
  if (s == "truncated-observed") return EstimateRule::truncated_observed;
  throw ValidationError("unknown estimate_rule '" + s +
                        "' (expected 'fixed' or 'truncated-observed')");
}

double beta_c_min() { return 1.0 - std_normal_cdf(2.0); }
double beta_c_max() { return std_normal_cdf(2.0); }

void DesignSpec::validate() const {
  for (double v : {alpha, alpha0, alpha1, beta_c, n1, delta_a, delta_min})
    if (!std::isfinite(v))
      throw ValidationError("design parameters must all be finite");
  if (!(0.0 < alpha1 && alpha1 < alpha && alpha < alpha0 && alpha0 < 1.0))
    throw ValidationError(
        "levels must satisfy 0 < alpha1 < alpha < alpha0 < 1, got alpha1=" +
        fmt(alpha1) + " alpha=" + fmt(alpha) + " alpha0=" + fmt(alpha0));
  if (!(beta_c >= beta_c_min() && beta_c <= beta_c_max()))
    throw ValidationError(
        "beta_c=" + fmt(beta_c) + " outside the admissible range [1-Phi(2), Phi(2)] = [" +
        fmt(beta_c_min()) + ", " + fmt(beta_c_max()) +
        "] required for a monotone second-stage size map");
  if (!(n1 > 0.0)) throw ValidationError("n1 must be positive, got " + fmt(n1));
  if (!(delta_min > 0.0))
    throw ValidationError("delta_min must be positive, got " + fmt(delta_min));
}

double DesignSpec::drift() const { return std::sqrt(0.5 * n1) * delta_a; }

double DesignSpec::truncation_kink() const {
  return delta_min * std::sqrt(0.5 * n1);
}

ContinuationRegion continuation_region(const DesignSpec& spec) {
  spec.validate();
  return {upper_quantile(spec.alpha0), upper_quantile(spec.alpha1)};
}

double likelihood_ratio(double z1, const DesignSpec& spec) {
  const double theta = spec.drift();
  return std::exp(theta * z1 - 0.5 * theta * theta);
}

double interim_estimate(double z1, const DesignSpec& spec) {
  if (spec.estimate_rule == EstimateRule::fixed) return spec.delta_min;
  return std::max(spec.delta_min, z1 * std::sqrt(2.0 / spec.n1));
}

double q_function(double z1, const DesignSpec& spec) {
  return likelihood_ratio(z1, spec) / interim_estimate(z1, spec);
}

int q_derivative_sign(double z1, const DesignSpec& spec) {
  const double theta = spec.drift();
  if (spec.estimate_rule == EstimateRule::fixed) return sign_of(theta);
  // log Q = theta*z - theta^2/2 - log(estimate); above the kink the estimate
  // grows like z, contributing -1/z to the log-derivative.
  if (z1 < spec.truncation_kink()) return sign_of(theta);
  return sign_of(theta - 1.0 / z1);
}

Curve raw_q_curve(const DesignSpec& spec) {
  Curve c;
  c.value = [spec](double z) { return q_function(z, spec); };
  if (spec.estimate_rule == EstimateRule::truncated_observed)
    c.kinks.push_back(spec.truncation_kink());
  return c;
}

}  // namespace mcef
