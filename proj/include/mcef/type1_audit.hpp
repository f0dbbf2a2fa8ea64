#pragma once

#include <functional>
#include <vector>

#include "mcef/ce_optimal.hpp"
#include "mcef/design_model.hpp"
#include "mcef/numerics.hpp"

namespace mcef {

/// phi-weighted mean over the continuation region of the pure likelihood
/// ratio phi(z - sqrt(n1/2)*delta)/phi(z), in closed form:
///   [Phi(sqrt(n1/2)*delta - z_lo) - Phi(sqrt(n1/2)*delta - z_hi)] / (alpha0 - alpha1).
/// Requires delta <= 0 (audits probe the null side); equals one at delta == 0.
double pooled_q1(const DesignSpec& spec, double delta);

/// Slack of the exchange inequality behind the type-I bound:
///   pooled_q1 * int ce*phi  -  int ce * (phi(.-drift)/phi) * phi  >= 0
/// for any non-decreasing ce and delta <= 0. Throws if ce decreases.
double keyiq_check(const CEFunction& cef, const DesignSpec& spec, double delta,
                   const Tolerance& tol = {});
double keyiq_check(const std::function<double(double)>& ce,
                   const std::vector<double>& ce_kinks, const DesignSpec& spec,
                   double delta, const Tolerance& tol = {});

/// Exact rejection probability under true effect delta <= 0, with the
/// second-stage statistic normal with mean sqrt(n2(z1)/2)*delta:
///   Phi(drift - z_hi) + int Phi(sqrt(n2/2)*delta - z_{ce(z1)}) phi(z1-drift) dz1.
double exact_rejection(const CEFunction& cef, const DesignSpec& spec,
                       double delta, const Tolerance& tol = {});
double exact_rejection(const std::function<double(double)>& ce,
                       const std::vector<double>& ce_kinks,
                       const DesignSpec& spec, double delta,
                       const Tolerance& tol = {});

/// The closed-form bound ladder dominating the exact rejection probability
/// for delta <= 0 and a level-calibrated non-decreasing ce:
///   exact <= b1 <= b2 <= b3 == alpha.
struct BoundChain {
  double b1 = 0.0;  // first stage + int ce * likelihood-ratio mass
  double b2 = 0.0;  // convex two-point form via pooled_q1
  double b3 = 0.0;  // alpha1*(alpha0-alpha)/(alpha0-alpha1) + alpha0*(alpha-alpha1)/(alpha0-alpha1)
};

BoundChain bound_chain(const CEFunction& cef, const DesignSpec& spec,
                       double delta, const Tolerance& tol = {});

struct Type1Row {
  double delta = 0.0;
  double first_stage_reject = 0.0;
  double second_stage_mass = 0.0;
  double exact_total = 0.0;
  double bound_total = 0.0;
};

/// Exact rejection and bound per requested delta (all <= 0). At delta == 0
/// the exact computation is reported and the bound equals alpha.
std::vector<Type1Row> type1_scan(const CEFunction& cef, const DesignSpec& spec,
                                 const std::vector<double>& deltas,
                                 const Tolerance& tol = {});

}  // namespace mcef
