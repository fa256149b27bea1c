#include "honestsets/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace honestsets::numkit {

namespace {

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < 2000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x).
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 2000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0) throw std::domain_error("gamma_p: a must be positive");
  if (x < 0.0) throw std::domain_error("gamma_p: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(double x, int df) {
  if (df < 1) throw std::domain_error("chi2_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(int df, double prob) {
  if (df < 1) throw std::domain_error("chi2_quantile: df must be >= 1");
  if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("chi2_quantile: prob must be in (0,1)");

  // Wilson-Hilferty cube-root start.
  const double z = normal_quantile(prob);
  const double c = 2.0 / (9.0 * df);
  double x = df * std::pow(1.0 - c + z * std::sqrt(c), 3.0);
  if (!(x > 0.0) || !std::isfinite(x)) x = static_cast<double>(df);

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  const double a = 0.5 * df;
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, df) - prob;
    if (f > 0.0) hi = x; else lo = x;
    const double logpdf = -0.5 * x + (a - 1.0) * std::log(x) - a * std::log(2.0) - std::lgamma(a);
    const double pdf = std::exp(logpdf);
    double step = (pdf > 0.0) ? f / pdf : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi) || pdf <= 0.0) {
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * x;
    }
    if (std::abs(next - x) < 1e-12 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("normal_quantile: prob must be in (0,1)");

  // Acklam's rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (prob < plow) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - plow) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Two Newton steps against the high-precision CDF.
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - prob;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf > 0.0) x -= e / pdf;
  }
  return x;
}

}  // namespace honestsets::numkit
