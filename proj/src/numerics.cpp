#include "mcef/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mcef/errors.hpp"

namespace mcef {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kInvSqrt2 = 0.7071067811865475244008444;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void Tolerance::validate() const {
  if (!(abs_tol > 0.0) || !std::isfinite(abs_tol))
    throw ValidationError("abs_tol must be positive and finite, got " + fmt(abs_tol));
  if (!(rel_tol >= 0.0) || !std::isfinite(rel_tol))
    throw ValidationError("rel_tol must be nonnegative and finite, got " + fmt(rel_tol));
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
}

double std_normal_pdf(double x) noexcept {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double phi_mass(double a, double b) noexcept {
  return std_normal_cdf(b) - std_normal_cdf(a);
}

namespace {

// Rational starting estimate for the normal quantile (Acklam's coefficients),
// accurate to ~1e-9 on its own; the caller polishes against the cdf.
double quantile_estimate(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_quantile requires p in (0,1), got " + fmt(p));
  double x = quantile_estimate(p);
  // Halley polish on cdf(x) - p.  The rational estimate is within ~1e-9, so
  // the cubic step lands sub-ulp immediately; iterate until the step rounds
  // to nothing so the result is exact to the last bit the cdf can resolve.
  for (int it = 0; it < 6; ++it) {
    const double err = std_normal_cdf(x) - p;
    if (err == 0.0) break;
    const double u = err / std_normal_pdf(x);
    const double xn = x - u / (1.0 + 0.5 * x * u);
    if (!std::isfinite(xn) || xn == x) break;
    x = xn;
  }
  return x;
}

double upper_quantile(double u) {
  return 0.0 - std_normal_quantile(u);  // 0.0 - x avoids returning -0.0
}

namespace {

// 15-point Kronrod abscissae/weights with the embedded 7-point Gauss rule.
constexpr double kXgk[8] = {0.9914553711208126, 0.9491079123427585,
                            0.8648644233597691, 0.7415311855993944,
                            0.5860872354676911, 0.4058451513773972,
                            0.2077849550078985, 0.0};
constexpr double kWgk[8] = {0.0229353220105292, 0.0630920926299785,
                            0.1047900103222502, 0.1406532597155259,
                            0.1690047266392679, 0.1903505780647854,
                            0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {0.1294849661688697, 0.2797053914892767,
                           0.3818300505051189, 0.4179591836734694};

struct PanelEstimate {
  double kronrod;
  double error;
};

PanelEstimate gk15(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    resk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  resk *= half;
  resg *= half;
  return {resk, std::fabs(resk - resg)};
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const Tolerance& tol) {
  tol.validate();
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw ValidationError("integration limits must be finite");
  if (a > b) throw ValidationError("integration requires a <= b");
  if (a == b) return 0.0;

  const int depth_cap = std::min(60, tol.max_iter);
  const double span = b - a;
  struct Seg {
    double a, b;
    int depth;
  };
  std::vector<Seg> stack{{a, b, 0}};
  double total = 0.0;
  while (!stack.empty()) {
    const Seg s = stack.back();
    stack.pop_back();
    const PanelEstimate p = gk15(f, s.a, s.b);
    const double width = s.b - s.a;
    const double local_abs = tol.abs_tol * (width / span);
    const double floor_width =
        1e-15 * std::max(1.0, std::fabs(s.a) + std::fabs(s.b));
    if (p.error <= std::max(local_abs, tol.rel_tol * std::fabs(p.kronrod)) ||
        width <= floor_width) {
      total += p.kronrod;
      continue;
    }
    if (s.depth >= depth_cap)
      throw NumericalError("quadrature did not converge on [" + fmt(s.a) + ", " +
                           fmt(s.b) + "] (estimated error " + fmt(p.error) + ")");
    const double mid = 0.5 * (s.a + s.b);
    stack.push_back({s.a, mid, s.depth + 1});
    stack.push_back({mid, s.b, s.depth + 1});
  }
  return total;
}

double integrate_with_breaks(const std::function<double(double)>& f, double a,
                             double b, std::vector<double> breaks,
                             const Tolerance& tol) {
  if (a > b) throw ValidationError("integration requires a <= b");
  std::vector<double> pts;
  pts.push_back(a);
  std::sort(breaks.begin(), breaks.end());
  for (double x : breaks)
    if (x > a && x < b && x - pts.back() > 1e-14 * std::max(1.0, std::fabs(x)))
      pts.push_back(x);
  pts.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    total += integrate(f, pts[i], pts[i + 1], tol);
  return total;
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 const Tolerance& tol) {
  tol.validate();
  if (!(std::isfinite(lo) && std::isfinite(hi)) || lo > hi)
    throw ValidationError("find_root requires a finite ordered bracket");

  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw NumericalError("find_root: no sign change on [" + fmt(lo) + ", " +
                         fmt(hi) + "]");

  // Brent: inverse quadratic / secant steps with bisection fallback.
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < std::max(tol.max_iter, 100); ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) +
                        0.5 * std::max(tol.abs_tol, tol.rel_tol * std::fabs(b));
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    if (std::fabs(d) > tol1)
      b += d;
    else
      b += (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
  }
  throw NumericalError("find_root did not converge within max_iter iterations");
}

}  // namespace mcef
