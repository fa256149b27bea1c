#pragma once

namespace honestsets::numkit {

// Regularized lower incomplete gamma P(a, x); series for x < a + 1, Lentz
// continued fraction otherwise. Accurate to ~1e-14 relative.
double gamma_p(double a, double x);

double chi2_cdf(double x, int df);

// prob-quantile of the chi-square with df degrees of freedom. Bracketed Newton
// on the regularized incomplete gamma, Wilson-Hilferty start.
double chi2_quantile(int df, double prob);

double normal_cdf(double x);

// prob-quantile of the standard normal: Acklam rational start + Newton polish.
double normal_quantile(double prob);

}  // namespace honestsets::numkit
