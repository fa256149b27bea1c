#pragma once

#include <span>

#include "honestsets/rng.hpp"
#include "honestsets/types.hpp"

namespace honestsets::stein {

// Shrinkage of the complement response toward zero. The estimate is the
// untruncated (1 - B) y_perp; only the risk estimate L_hat is truncated at 0.
struct SteinFit {
  double B = 0.0;       // df * sigma^2 / ||y_perp||^2, +inf when y_perp = 0
  double L_hat = 0.0;   // max(0, 1 - B)
  Vector mu_perp_hat;
  int df = 0;           // n - k
};

SteinFit stein_shrink(const Vector& y_perp, int df, double sigma2);

struct SureConstant {
  double alpha = 0.0;
  double value = 0.0;  // c_s(alpha)
  int n = 0;
  int n_sim = 0;
};

// Statistic sqrt(n) * |L - ||mu_check||^2 / (n sigma^2)| for one chi-square
// draw W, with B = n/W, mu_check = (1-B) Y so ||mu_check||^2/sigma^2 = (1-B)^2 W.
// truncate selects L = (1-B)_+ versus L = 1-B.
double sure_deviation_statistic(double W, int n, bool truncate);

// Empirical (1-alpha) quantile over a set of precomputed statistics.
double empirical_quantile(std::span<const double> sorted_values, double alpha);

SureConstant estimate_cs_from_draws(double alpha, int n, std::span<const double> chi2_draws,
                                    bool truncate = true);

// Simulates n_sim chi-square_n draws and returns the (1-alpha) quantile of the
// deviation statistic. truncate = true is the convention used by the radii.
SureConstant estimate_cs(double alpha, int n, int n_sim, numkit::RngStream rng,
                         bool truncate = true);

// Process-wide memoized c_s, keyed on (n, alpha, n_sim, master_seed, truncate);
// safe for concurrent use.
SureConstant cs_constant_cached(double alpha, int n, int n_sim, std::uint64_t master_seed,
                                bool truncate = true);

// r_perp for a single candidate set:
//   r^2 = c2 * ((n-k)/n) * sigma^2 * (L_hat + cs * (n-k)^{-1/2})
double radius_perp_single(const SteinFit& fit, int n, int k, double sigma2, double c2,
                          const SureConstant& cs);

// Multi-candidate form with deviation allowance cm * M^{1/4} / sqrt(n-k).
double radius_perp_multi(const SteinFit& fit, int n, int k, double sigma2, double c2, double cm,
                         int M);

}  // namespace honestsets::stein
