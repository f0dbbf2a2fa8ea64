#pragma once

#include <string>

#include "mcef/numerics.hpp"

namespace mcef {

/// How the interim effect estimate entering the sample-size recalculation is
/// formed from the first-stage statistic.
enum class EstimateRule {
  fixed,               // always delta_min
  truncated_observed,  // max(delta_min, observed effect z1*sqrt(2/n1))
};

std::string to_string(EstimateRule rule);
EstimateRule estimate_rule_from_string(const std::string& s);

/// Admissible range for beta_c, required so the second-stage size is a
/// monotone function of the conditional error spent.
double beta_c_min();  // 1 - Phi(2)
double beta_c_max();  // Phi(2)

/// Parameters of a two-stage design with sample-size recalculation.
/// alpha: overall one-sided level; alpha0: futility bound (stop if p1 > alpha0);
/// alpha1: first-stage efficacy bound (reject if p1 <= alpha1).
struct DesignSpec {
  double alpha = 0.025;
  double alpha0 = 0.5;
  double alpha1 = 0.01;
  double beta_c = 0.2;      // targeted conditional type-II error
  double n1 = 50.0;         // first-stage sample size per group
  double delta_a = 0.3;     // design alternative in the likelihood ratio
  double delta_min = 0.15;  // floor for the interim effect estimate
  EstimateRule estimate_rule = EstimateRule::truncated_observed;

  void validate() const;  // throws ValidationError naming the violated rule

  double drift() const;            // sqrt(n1/2) * delta_a
  double truncation_kink() const;  // delta_min * sqrt(n1/2)
};

/// First-stage z-values for which the trial continues to stage two:
/// the half-open interval ]z_lo, z_hi].
struct ContinuationRegion {
  double z_lo = 0.0;
  double z_hi = 0.0;

  double width() const { return z_hi - z_lo; }
  bool contains(double z) const { return z > z_lo && z <= z_hi; }
};

ContinuationRegion continuation_region(const DesignSpec& spec);

/// Density ratio of the first-stage statistic under the design alternative
/// versus the null: exp(theta*z1 - theta^2/2) with theta = sqrt(n1/2)*delta_a.
double likelihood_ratio(double z1, const DesignSpec& spec);

/// Interim effect estimate fed into the sample-size recalculation.
double interim_estimate(double z1, const DesignSpec& spec);

/// Weight curve Q(z1) = likelihood_ratio(z1) / interim_estimate(z1); the
/// conditional error function is built from a monotone rearrangement of it.
double q_function(double z1, const DesignSpec& spec);

/// Sign (-1, 0, +1) of dQ/dz1, evaluated analytically. At the truncation kink
/// the right-hand sign is reported.
int q_derivative_sign(double z1, const DesignSpec& spec);

/// Q as a Curve, with the truncation kink registered for quadrature.
Curve raw_q_curve(const DesignSpec& spec);

}  // namespace mcef
