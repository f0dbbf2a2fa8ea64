#pragma once

#include <functional>
#include <vector>

namespace mcef {

/// Shared accuracy knobs for quadrature, root finding and calibration loops.
struct Tolerance {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iter = 200;

  void validate() const;  // throws ValidationError on nonsensical settings
};

/// A scalar function of z together with the abscissae where it is not smooth.
/// Quadrature panels are always split at the listed kinks so that every panel
/// sees a smooth integrand.
struct Curve {
  std::function<double(double)> value;
  std::vector<double> kinks;

  double operator()(double z) const { return value(z); }
};

/// Integrands are treated as numerically zero beyond |z| = 8.5.
inline constexpr double kZTruncation = 8.5;

double std_normal_pdf(double x) noexcept;
double std_normal_cdf(double x) noexcept;

/// Inverse of std_normal_cdf on (0,1). Rational initial estimate polished
/// against the cdf itself, so cdf(std_normal_quantile(p)) == p to ~1e-15.
double std_normal_quantile(double p);

/// Upper-tail quantile z_u with cdf(z_u) = 1 - u, evaluated tail-stably.
double upper_quantile(double u);

/// Probability mass of the standard normal on [a, b].
double phi_mass(double a, double b) noexcept;

/// Adaptive Gauss-Kronrod (7-15) quadrature with interval halving.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const Tolerance& tol = {});

/// Same, but panels are pre-split at the given abscissae (kinks, jumps).
double integrate_with_breaks(const std::function<double(double)>& f, double a,
                             double b, std::vector<double> breaks,
                             const Tolerance& tol = {});

/// Brent's method on [lo, hi]; requires a sign change. The result depends on
/// f only through signs and ratios, so rescaling f by a positive constant
/// leaves it unchanged.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 const Tolerance& tol = {});

}  // namespace mcef
