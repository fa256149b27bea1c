#include "honestsets/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace honestsets::solvers {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Coordinate-descent state with glmnet-style covariance updates: maintains
// c_j = <X_j, y - X b>/n for all j, fetching Gram columns lazily the first
// time a variable moves. The workspace survives across a warm-started path.
struct CdWorkspace {
  const Matrix& X;
  Index n, p;
  Vector q;              // X^T y / n
  Vector col_norm2;      // ||X_j||^2 / n
  Vector c;              // current gradients X^T (y - X b) / n
  Vector beta;
  std::vector<int> gram_slot;     // -1 until the Gram column is cached
  std::vector<Vector> gram_cols;  // cached columns of X^T X / n
  std::vector<Index> active;
  std::vector<char> in_active;

  CdWorkspace(const Matrix& X_, const Vector& y)
      : X(X_), n(X_.rows()), p(X_.cols()),
        q(X_.transpose() * y / static_cast<double>(X_.rows())),
        col_norm2(X_.cols()),
        c(q),
        beta(Vector::Zero(X_.cols())),
        gram_slot(static_cast<std::size_t>(X_.cols()), -1),
        in_active(static_cast<std::size_t>(X_.cols()), 0) {
    for (Index j = 0; j < p; ++j) col_norm2[j] = X.col(j).squaredNorm() / n;
  }

  const Vector& gram_column(Index j) {
    int slot = gram_slot[static_cast<std::size_t>(j)];
    if (slot < 0) {
      slot = static_cast<int>(gram_cols.size());
      gram_cols.emplace_back(X.transpose() * X.col(j) / static_cast<double>(n));
      gram_slot[static_cast<std::size_t>(j)] = slot;
    }
    return gram_cols[static_cast<std::size_t>(slot)];
  }

  void activate(Index j) {
    if (!in_active[static_cast<std::size_t>(j)]) {
      in_active[static_cast<std::size_t>(j)] = 1;
      active.push_back(j);
    }
  }

  void apply_change(Index j, double delta) { c.noalias() -= gram_column(j) * delta; }
};

// Runs coordinate descent to convergence at the given lambda, starting from
// the workspace's current beta. Returns (sweeps, converged).
std::pair<int, bool> cd_lasso(CdWorkspace& w, double lambda, double tol, int max_sweeps,
                              int sweeps_used) {
  int sweeps = sweeps_used;
  bool converged = false;
  while (sweeps < max_sweeps) {
    ++sweeps;  // full KKT pass over all coordinates
    double max_change = 0.0;
    for (Index j = 0; j < w.p; ++j) {
      const double d = w.col_norm2[j];
      if (d <= 0.0) continue;  // null column stays at zero
      const double z = w.c[j] + d * w.beta[j];
      const double bj = soft_threshold(z, lambda) / d;
      const double delta = bj - w.beta[j];
      if (delta != 0.0) {
        w.beta[j] = bj;
        w.apply_change(j, delta);
        max_change = std::max(max_change, std::abs(delta));
      }
      if (bj != 0.0) w.activate(j);
    }
    if (max_change < tol) {
      converged = true;
      break;
    }
    while (sweeps < max_sweeps) {
      ++sweeps;  // inner passes over the active set only
      double inner_change = 0.0;
      for (Index j : w.active) {
        const double d = w.col_norm2[j];
        if (d <= 0.0) continue;
        const double z = w.c[j] + d * w.beta[j];
        const double bj = soft_threshold(z, lambda) / d;
        const double delta = bj - w.beta[j];
        if (delta != 0.0) {
          w.beta[j] = bj;
          w.apply_change(j, delta);
          inner_change = std::max(inner_change, std::abs(delta));
        }
      }
      if (inner_change < tol) break;
    }
  }
  return {sweeps, converged};
}

}  // namespace

double lambda_max(const Matrix& X, const Vector& y) {
  return (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  const double n = static_cast<double>(X.rows());
  return (y - X * beta).squaredNorm() / (2.0 * n) + lambda * beta.lpNorm<1>();
}

double mcp_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda,
                     double gamma) {
  const double n = static_cast<double>(X.rows());
  double pen = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double t = std::abs(beta[j]);
    pen += (t <= gamma * lambda) ? t - t * t / (2.0 * gamma * lambda) : gamma * lambda / 2.0;
  }
  return (y - X * beta).squaredNorm() / (2.0 * n) + lambda * pen;
}

PenalizedFit lasso(const Matrix& X, const Vector& y, double lambda, double tol, int max_sweeps) {
  require(lambda > 0.0, "lasso: lambda must be positive");
  require(X.allFinite() && y.allFinite(), "lasso: non-finite inputs");
  require(X.rows() == y.size(), "lasso: dimension mismatch");

  CdWorkspace w(X, y);
  auto [sweeps, converged] = cd_lasso(w, lambda, tol, max_sweeps, 0);

  PenalizedFit fit;
  fit.coefficients = w.beta;
  fit.lambda = lambda;
  fit.n_sweeps = sweeps;
  fit.converged = converged;
  return fit;
}

namespace {

// Univariate MCP minimizer for d = ||X_j||^2/n, z = <X_j, partial residual>/n.
double mcp_update(double z, double d, double lambda, double gamma) {
  if (d * gamma > 1.0) {
    const double az = std::abs(z);
    if (az <= lambda) return 0.0;
    if (az <= gamma * lambda * d) return soft_threshold(z, lambda) / (d - 1.0 / gamma);
    return z / d;
  }
  // Concave in t: the minimizer is an endpoint, 0 or z/d.
  const double t = z / d;
  const double at = std::abs(t);
  const double pen =
      (at <= gamma * lambda) ? at - at * at / (2.0 * gamma * lambda) : gamma * lambda / 2.0;
  const double f_t = -z * t + 0.5 * d * t * t + lambda * pen;
  return (f_t < 0.0) ? t : 0.0;
}

}  // namespace

PenalizedFit mcp(const Matrix& X, const Vector& y, double lambda, double gamma, double tol,
                 int max_sweeps) {
  require_domain(gamma > 1.0, "mcp: gamma must exceed 1");
  PenalizedFit warm = lasso(X, y, lambda, tol, max_sweeps);

  CdWorkspace w(X, y);
  for (Index j = 0; j < w.p; ++j) {
    if (warm.coefficients[j] != 0.0) {
      w.activate(j);
      w.beta[j] = warm.coefficients[j];
      w.apply_change(j, warm.coefficients[j]);
    }
  }

  int sweeps = warm.n_sweeps;
  bool converged = false;
  while (sweeps < max_sweeps) {
    ++sweeps;
    double max_change = 0.0;
    for (Index j = 0; j < w.p; ++j) {
      const double d = w.col_norm2[j];
      if (d <= 0.0) continue;
      const double z = w.c[j] + d * w.beta[j];
      const double bj = mcp_update(z, d, lambda, gamma);
      const double delta = bj - w.beta[j];
      if (delta != 0.0) {
        w.beta[j] = bj;
        w.apply_change(j, delta);
        max_change = std::max(max_change, std::abs(delta));
      }
      if (bj != 0.0) w.activate(j);
    }
    if (max_change < tol) {
      converged = true;
      break;
    }
  }

  PenalizedFit fit;
  fit.coefficients = w.beta;
  fit.lambda = lambda;
  fit.gamma = gamma;
  fit.n_sweeps = sweeps;
  fit.converged = converged;
  return fit;
}

namespace {

Vector log_spaced_grid(double top, double bottom, int count) {
  Vector g(count);
  const double step = (std::log(bottom) - std::log(top)) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = std::exp(std::log(top) + step * i);
  return g;
}

}  // namespace

double select_lambda(const Matrix& X, const Vector& y, double sigma, const LambdaRule& rule,
                     numkit::RngStream rng) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (rule.kind == LambdaKind::theoretical) {
    return 2.0 * std::sqrt(2.0) * sigma * std::sqrt(std::log(static_cast<double>(p)) / n);
  }

  require(rule.folds >= 2, "select_lambda: CV needs folds >= 2");
  require(n >= rule.folds, "select_lambda: CV needs n >= folds");
  const double y_var = (y.array() - y.mean()).square().sum();
  if (!(y_var > 0.0)) throw calibration_error("select_lambda: degenerate response");

  const int ngrid = 100;
  const double top = lambda_max(X, y);
  const Vector grid = log_spaced_grid(top, 1e-3 * top, ngrid);

  numkit::RngEngine eng(rng);
  const IndexSet perm = eng.sample_without_replacement(n, n);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % rule.folds);
  }

  const double cv_tol = 1e-5;  // path fits; final radii never touch these betas
  Matrix fold_err(rule.folds, ngrid);
  for (int f = 0; f < rule.folds; ++f) {
    std::vector<Index> tr, te;
    for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    Matrix Xtr(static_cast<Index>(tr.size()), p), Xte(static_cast<Index>(te.size()), p);
    Vector ytr(static_cast<Index>(tr.size())), yte(static_cast<Index>(te.size()));
    for (std::size_t i = 0; i < tr.size(); ++i) {
      Xtr.row(static_cast<Index>(i)) = X.row(tr[i]);
      ytr[static_cast<Index>(i)] = y[tr[i]];
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      Xte.row(static_cast<Index>(i)) = X.row(te[i]);
      yte[static_cast<Index>(i)] = y[te[i]];
    }

    CdWorkspace w(Xtr, ytr);
    for (int gi = 0; gi < ngrid; ++gi) {
      cd_lasso(w, grid[gi], cv_tol, 20000, 0);
      fold_err(f, gi) = (yte - Xte * w.beta).squaredNorm() / static_cast<double>(te.size());
    }
  }

  Vector mean_err = fold_err.colwise().mean();
  Vector se(ngrid);
  for (int gi = 0; gi < ngrid; ++gi) {
    const double m = mean_err[gi];
    double ss = 0.0;
    for (int f = 0; f < rule.folds; ++f) ss += (fold_err(f, gi) - m) * (fold_err(f, gi) - m);
    se[gi] = std::sqrt(ss / (rule.folds - 1) / rule.folds);
  }

  int imin = 0;
  for (int gi = 1; gi < ngrid; ++gi) {
    if (mean_err[gi] < mean_err[imin]) imin = gi;
  }
  if (rule.kind == LambdaKind::cv_min) return grid[imin];

  const double bar = mean_err[imin] + se[imin];
  for (int gi = 0; gi < ngrid; ++gi) {  // grid is decreasing: first hit = largest lambda
    if (mean_err[gi] <= bar) return grid[gi];
  }
  return grid[imin];
}

IndexSet threshold_support(const Vector& coefficients, double tau) {
  require(tau >= 0.0, "threshold_support: tau must be non-negative");
  IndexSet out;
  for (Index j = 0; j < coefficients.size(); ++j) {
    if (std::abs(coefficients[j]) > tau) out.push_back(j);
  }
  return out;
}

}  // namespace honestsets::solvers
