#include "mcef/nu_psi.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mcef/design_model.hpp"
#include "mcef/errors.hpp"

namespace mcef {

namespace {

constexpr double kLog4 = 1.3862943611198906188345;
constexpr double kHalfLog2Pi = 0.9189385332046727417803;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void PsiContext::validate() const {
  if (!(beta_c >= beta_c_min() && beta_c <= beta_c_max()))
    throw ValidationError("beta_c=" + fmt(beta_c) +
                          " outside the admissible range [1-Phi(2), Phi(2)]");
  if (!(u_floor > 0.0 && u_floor <= 1e-6))
    throw ValidationError("u_floor must lie in (0, 1e-6], got " + fmt(u_floor));
}

PsiContext make_psi_context(double beta_c) {
  PsiContext ctx{beta_c, std_normal_quantile(beta_c), 1e-10};
  ctx.validate();
  return ctx;
}

double nu2(double u, const PsiContext& ctx) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("nu2 requires u in (0,1), got " + fmt(u));
  const double zu = upper_quantile(u);
  const double d = zu - ctx.z_target;
  return 2.0 * d * d;
}

double nu2_prime(double u, const PsiContext& ctx) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("nu2_prime requires u in (0,1), got " + fmt(u));
  const double zu = upper_quantile(u);
  return -4.0 * (zu - ctx.z_target) / std_normal_pdf(zu);
}

double psi_critical_z(double y, const PsiContext& ctx) {
  ctx.validate();
  if (std::isnan(y) || y > 0.0)
    throw std::domain_error("psi requires y <= 0, got " + fmt(y));
  const double t = ctx.z_target;
  if (y == 0.0) return t;

  // Solve -nu2_prime(u) = -y for the boundary z = z_u > t on a log scale:
  //   h(z) = log 4 + log(z - t) + z^2/2 + log(2*pi)/2 - log(-y) = 0.
  // h is non-decreasing on (t, inf) exactly when |t| <= 2, which is the
  // admissible beta_c range; solving in z keeps relative accuracy in y even
  // where du/dy is astronomically small.
  const double logw = std::log(-y);
  const double z_cap = upper_quantile(ctx.u_floor);
  const auto h = [&](double z) {
    return kLog4 + std::log(z - t) + 0.5 * z * z + kHalfLog2Pi - logw;
  };
  if (h(z_cap) <= 0.0) return z_cap;  // demand beyond the floor: clamp

  // First-order offset for tiny demands, where the log form degenerates.
  const double d0 = std::exp(logw - kLog4 - 0.5 * t * t - kHalfLog2Pi);
  if (d0 < 1e-12 * std::max(1.0, std::fabs(t))) return t + d0;

  double lo = t, hi = z_cap;
  const double bulk = logw - kLog4 - kHalfLog2Pi;
  double z = bulk > 0.125 ? std::sqrt(2.0 * bulk) : t + d0;
  if (!(z > lo && z < hi)) z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double hz = h(z);
    if (hz > 0.0)
      hi = z;
    else if (hz < 0.0)
      lo = z;
    else
      return z;
    const double zn_newton = z - hz / (1.0 / (z - t) + z);
    const double zn =
        (zn_newton > lo && zn_newton < hi) ? zn_newton : 0.5 * (lo + hi);
    if (std::fabs(zn - z) <= 4e-16 * std::max(1.0, std::fabs(z))) return zn;
    z = zn;
  }
  throw NumericalError("psi boundary solve did not converge for y=" + fmt(y));
}

double psi(double y, const PsiContext& ctx) {
  if (std::isnan(y) || y > 0.0)
    throw std::domain_error("psi requires y <= 0, got " + fmt(y));
  if (y == 0.0) return 1.0 - ctx.beta_c;
  const double z = psi_critical_z(y, ctx);
  if (z >= upper_quantile(ctx.u_floor)) return ctx.u_floor;
  return std_normal_cdf(-z);
}

}  // namespace mcef
