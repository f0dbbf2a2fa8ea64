#pragma once

#include "mcef/numerics.hpp"

namespace mcef {

/// Context for the second-stage size map nu2 and its inverse-derivative psi.
/// z_target is the normal quantile at the targeted conditional power,
/// z_{1-beta_c} = Phi^{-1}(beta_c).
struct PsiContext {
  double beta_c = 0.2;
  double z_target = 0.0;
  double u_floor = 1e-10;  // smallest conditional error psi will return

  void validate() const;
};

PsiContext make_psi_context(double beta_c);

/// Second-stage sample size (per unit squared effect) needed to spend
/// conditional error u at conditional power 1-beta_c:
///   nu2(u) = 2 * (z_u - z_target)^2,  z_u = Phi^{-1}(1-u).
double nu2(double u, const PsiContext& ctx);

/// d nu2 / du = -4 (z_u - z_target) / phi(z_u); negative below u = 1-beta_c,
/// zero there, positive above, and strictly increasing for admissible beta_c.
double nu2_prime(double u, const PsiContext& ctx);

/// Inverse of nu2_prime restricted to its negative branch: the unique
/// u in (u_floor, 1-beta_c] with nu2_prime(u) = y, for y <= 0. Demands beyond
/// the floor clamp to u_floor; psi(0) = 1-beta_c.
double psi(double y, const PsiContext& ctx);

/// The second-stage rejection boundary z_u at u = psi(y). Solving in z keeps
/// full relative accuracy in y across the whole branch.
double psi_critical_z(double y, const PsiContext& ctx);

}  // namespace mcef
