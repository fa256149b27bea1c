#pragma once

#include <optional>

#include "honestsets/rng.hpp"
#include "honestsets/types.hpp"

namespace honestsets::solvers {

// Penalized least-squares fit under the 1/(2n) loss scaling:
//   (1/2n) ||y - X b||^2 + lambda * ||b||_1                      (lasso)
//   (1/2n) ||y - X b||^2 + lambda * sum_j rho(|b_j|; lambda, g)  (mcp)
struct PenalizedFit {
  Vector coefficients;
  double lambda = 0.0;
  std::optional<double> gamma;  // absent = lasso
  int n_sweeps = 0;
  bool converged = false;
};

PenalizedFit lasso(const Matrix& X, const Vector& y, double lambda, double tol = 1e-7,
                   int max_sweeps = 100000);

// Warm-started from the lasso solution at the same lambda; returns a
// stationary point with objective no worse than the warm start.
PenalizedFit mcp(const Matrix& X, const Vector& y, double lambda, double gamma,
                 double tol = 1e-7, int max_sweeps = 100000);

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda);
double mcp_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda,
                     double gamma);

// Largest lambda with a null lasso fit: ||X^T y / n||_inf.
double lambda_max(const Matrix& X, const Vector& y);

enum class LambdaKind { theoretical, cv_min, cv_1se };

struct LambdaRule {
  LambdaKind kind = LambdaKind::theoretical;
  int folds = 10;
};

// theoretical: 2*sqrt(2)*sigma*sqrt(log(p)/n). CV kinds: 100 log-spaced lambdas
// from lambda_max down to 1e-3*lambda_max, per-fold mean of held-out MSE,
// 1se = largest lambda within one standard error of the CV minimum.
double select_lambda(const Matrix& X, const Vector& y, double sigma, const LambdaRule& rule,
                     numkit::RngStream rng);

// {j : |coefficients_j| > tau}; tau = 0 returns the support.
IndexSet threshold_support(const Vector& coefficients, double tau);

}  // namespace honestsets::solvers
