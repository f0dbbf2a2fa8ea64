#pragma once

#include <functional>
#include <vector>

#include "mcef/design_model.hpp"
#include "mcef/monotoniser.hpp"
#include "mcef/nu_psi.hpp"
#include "mcef/numerics.hpp"

namespace mcef {

/// Conditional error function of the optimal family: z1 -> psi(-e^c / R(z1))
/// for a positive weight curve R. Non-decreasing whenever R is.
struct CEFunction {
  Curve curve;
  double c = 0.0;
  PsiContext ctx;
  ContinuationRegion region;

  double operator()(double z1) const;
};

double ce_value(const CEFunction& cef, double z1);

/// Probability, under the null, of continuing and then rejecting:
/// int over the continuation region of ce * phi.
double level(const CEFunction& cef, const Tolerance& tol = {});

struct CalibrationResult {
  double c_alpha = 0.0;
  double achieved_level = 0.0;
  int iterations = 0;
};

/// Chooses c so the level equals alpha - alpha1. Feasible iff
/// alpha - alpha1 < (1 - beta_c) * (alpha0 - alpha1).
CalibrationResult calibrate(const Curve& curve, const DesignSpec& spec,
                            const Tolerance& tol = {});

/// Calibrated CEFunction over the given weight curve.
CEFunction make_ce(const Curve& curve, const DesignSpec& spec,
                   const Tolerance& tol = {});

/// Calibrated optimum over non-decreasing conditional error functions
/// (weight curve = flattened Q).
CEFunction optimal_monotone_ce(const DesignSpec& spec,
                               const Tolerance& tol = {});

/// Calibrated optimum when monotonicity is not enforced (weight curve = raw Q).
CEFunction unconstrained_ce(const DesignSpec& spec, const Tolerance& tol = {});

/// Design objective: expected second-stage size weighting,
/// int nu2(ce(z)) * Q(z) * phi(z) dz over the continuation region, with the
/// original (unflattened) Q as the weight.
double objective(const std::function<double(double)>& ce,
                 const std::vector<double>& ce_kinks, const DesignSpec& spec,
                 const Tolerance& tol = {});
double objective(const CEFunction& cef, const DesignSpec& spec,
                 const Tolerance& tol = {});

/// Recalculated second-stage size at z1: nu2(ce(z1)) / interim_estimate^2.
/// Satisfies the conditional power identity
///   1 - Phi(z_{ce(z1)} - sqrt(n2/2) * interim_estimate) = 1 - beta_c.
double second_stage_n(const CEFunction& cef, double z1, const DesignSpec& spec);

/// n1 plus the expected recalculated size under the given true effect.
double expected_sample_size(const CEFunction& cef, const DesignSpec& spec,
                            double effect, const Tolerance& tol = {});

}  // namespace mcef
