#pragma once

#include <cstdint>
#include <map>

#include "honestsets/confset.hpp"
#include "honestsets/solvers.hpp"
#include "honestsets/types.hpp"

namespace honestsets::competitors {

// (1-alpha) empirical quantile of a simulated prediction-error statistic,
// keyed by the design it was calibrated for.
struct CalibratedConstant {
  enum class Kind { c_l, c_o };
  Kind kind = Kind::c_l;
  double alpha = 0.0;
  double value = 0.0;
  int n_sim = 0;
  std::uint64_t context_digest = 0;
  double lambda = 0.0;
  int sparsity = 0;
};

// FNV-1a over the raw matrix bytes; identifies a design realization in the
// calibration caches and golden files.
std::uint64_t design_digest(const Matrix& X);

// Squared radius of the sample-splitting ball: the larger root of the boundary
// quadratic in d = ||mu - X beta_hat||^2 / n of the studentized loss statistic.
double adaptive_radius2(double R_n, double sigma2, int n, double alpha);

// Ball centered at mu_hat = X_eval beta_hat (beta_hat fit on the other half).
confset::BallCS adaptive_cs_from_center(const Vector& y_eval, const Vector& mu_hat, double sigma2,
                                        double alpha);

confset::BallCS adaptive_cs(const Dataset& fit_half, const Dataset& eval_half,
                            const solvers::LambdaRule& rule, double alpha,
                            numkit::RngStream rng);

// Simulates n_sim s_eff-sparse coefficient draws (nonzeros uniform on (-b, b)),
// refits the lasso at lambda_fit on synthetic responses, and returns the
// (1-alpha) quantile of ||X(gamma_hat - gamma)||^2 / (sigma^2 s_norm log_p_norm).
CalibratedConstant lasso_error_quantile(const Matrix& X, double lambda_fit, int s_eff, double b,
                                        double sigma2, double alpha, int n_sim,
                                        numkit::RngStream rng, double s_norm, double log_p_norm);

// c_o for the oracle ball on the whole-data design; b is the caller's bound on
// ||beta||_inf (computed from the whole data for this oracle baseline).
CalibratedConstant calibrate_c_o(const Matrix& X, double lambda, int s_beta, double alpha,
                                 int n_sim, numkit::RngStream rng, double b, double sigma2 = 1.0);

// c_l with the rough bound b = max_i <X'_i, y'> / ||X'_i||^2 taken from the
// held-out half, so the constant is independent of the evaluation response.
CalibratedConstant estimate_cl(const Matrix& X_step2, const Matrix& X_prime,
                               const Vector& y_prime, int s_beta, double lambda_sim, double alpha,
                               int n_sim, numkit::RngStream rng, double sigma2 = 1.0);

// Ball centered at the whole-data lasso fit with radius^2 =
// c_o sigma^2 s_beta log(p) / n. s_beta = 0 degenerates to a radius-0 ball at
// the null fit.
confset::BallCS oracle_lasso_cs(const Dataset& data_full, int s_beta,
                                const solvers::LambdaRule& rule, double alpha,
                                const CalibratedConstant& c_o, numkit::RngStream rng);

struct TslOptions {
  double K = 2.0 * std::sqrt(2.0) + 0.01;
  double nu = 0.5;
  int n_sim_cl = 500;
  double E = 10.0;
  std::vector<double> a_grid;  // empty -> 0:0.05:4
};

// Lasso fit of the complement-projected problem, solved in reduced
// coordinates: returns the p-vector (zeros on A) and the fitted complement
// mean V V^T X beta_tilde.
struct ProjectedLassoFit {
  Vector beta;
  Vector mu_perp_hat;
};

ProjectedLassoFit projected_lasso(const Matrix& X, const Vector& y,
                                  const numkit::OrthoBasis& basis, double lambda2);

// Two-step construction with the shrinkage step replaced by a lasso on the
// projected problem and a calibrated prediction-error radius; requires the
// true sparsity s_beta. Candidates are trimmed to at most s_beta - 1 largest
// coefficients.
confset::EllipsoidCS two_step_lasso_cs(const Dataset& fit_half, const Dataset& eval_half,
                                       int s_beta, double alpha, confset::Criterion criterion,
                                       const solvers::LambdaRule& rule, numkit::RngStream rng,
                                       const TslOptions& opt = {});

}  // namespace honestsets::competitors
