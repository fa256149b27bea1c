#include "honestsets/competitors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>

#include "honestsets/special.hpp"

namespace honestsets::competitors {

std::uint64_t design_digest(const Matrix& X) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(X.data());
  const std::size_t len = static_cast<std::size_t>(X.size()) * sizeof(double);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

double adaptive_radius2(double R_n, double sigma2, int n, double alpha) {
  const double z = numkit::normal_quantile(1.0 - alpha);
  const double c = 2.0 * z * z * sigma2 / n;
  const double disc = (R_n + c) * (R_n + c) - R_n * R_n + 2.0 * z * z * sigma2 * sigma2 / n;
  require(disc >= 0.0, "adaptive_radius2: negative discriminant");
  return (R_n + c) + std::sqrt(disc);
}

confset::BallCS adaptive_cs_from_center(const Vector& y_eval, const Vector& mu_hat, double sigma2,
                                        double alpha) {
  require(mu_hat.allFinite(), "adaptive_cs: non-finite center");
  const int n = static_cast<int>(y_eval.size());
  const double R_n = (y_eval - mu_hat).squaredNorm() / n - sigma2;
  confset::BallCS ball;
  ball.center = mu_hat;
  ball.radius = std::sqrt(std::max(0.0, adaptive_radius2(R_n, sigma2, n, alpha)));
  return ball;
}

confset::BallCS adaptive_cs(const Dataset& fit_half, const Dataset& eval_half,
                            const solvers::LambdaRule& rule, double alpha,
                            numkit::RngStream rng) {
  const double sigma = std::sqrt(fit_half.sigma2);
  const double lambda = solvers::select_lambda(fit_half.X, fit_half.y, sigma, rule, rng);
  const solvers::PenalizedFit fit = solvers::lasso(fit_half.X, fit_half.y, lambda);
  return adaptive_cs_from_center(eval_half.y, eval_half.X * fit.coefficients, eval_half.sigma2,
                                 alpha);
}

CalibratedConstant lasso_error_quantile(const Matrix& X, double lambda_fit, int s_eff, double b,
                                        double sigma2, double alpha, int n_sim,
                                        numkit::RngStream rng, double s_norm, double log_p_norm) {
  if (n_sim < 100) throw calibration_error("lasso_error_quantile: n_sim too small");
  if (!(b > 0.0)) throw calibration_error("lasso_error_quantile: non-positive magnitude bound");
  require(s_eff >= 1, "lasso_error_quantile: sparsity must be >= 1");

  const Index n = X.rows();
  const Index p = X.cols();
  const double sigma = std::sqrt(sigma2);
  numkit::RngEngine eng(rng);

  std::vector<double> stats(static_cast<std::size_t>(n_sim));
  Vector gamma(p), ystar(n);
  for (int j = 0; j < n_sim; ++j) {
    gamma.setZero();
    const IndexSet supp = eng.sample_without_replacement(p, s_eff);
    for (Index idx : supp) gamma[idx] = eng.uniform(-b, b);
    ystar = X * gamma;
    for (Index i = 0; i < n; ++i) ystar[i] += sigma * eng.normal();
    const solvers::PenalizedFit fit = solvers::lasso(X, ystar, lambda_fit, 1e-6, 50000);
    stats[static_cast<std::size_t>(j)] =
        (X * (fit.coefficients - gamma)).squaredNorm() / (sigma2 * s_norm * log_p_norm);
  }
  std::sort(stats.begin(), stats.end());

  CalibratedConstant out;
  out.alpha = alpha;
  out.n_sim = n_sim;
  out.value = stein::empirical_quantile(stats, alpha);
  out.context_digest = design_digest(X);
  out.lambda = lambda_fit;
  out.sparsity = s_eff;
  return out;
}

CalibratedConstant calibrate_c_o(const Matrix& X, double lambda, int s_beta, double alpha,
                                 int n_sim, numkit::RngStream rng, double b, double sigma2) {
  CalibratedConstant out =
      lasso_error_quantile(X, lambda, s_beta, b, sigma2, alpha, n_sim, rng,
                           static_cast<double>(s_beta), std::log(static_cast<double>(X.cols())));
  out.kind = CalibratedConstant::Kind::c_o;
  return out;
}

CalibratedConstant estimate_cl(const Matrix& X_step2, const Matrix& X_prime,
                               const Vector& y_prime, int s_beta, double lambda_sim, double alpha,
                               int n_sim, numkit::RngStream rng, double sigma2) {
  double b = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < X_prime.cols(); ++j) {
    const double n2 = X_prime.col(j).squaredNorm();
    if (n2 > 0.0) b = std::max(b, X_prime.col(j).dot(y_prime) / n2);
  }
  if (!(b > 0.0)) throw calibration_error("estimate_cl: magnitude bound b <= 0");

  CalibratedConstant out = lasso_error_quantile(
      X_step2, lambda_sim, s_beta, b, sigma2, alpha, n_sim, rng, static_cast<double>(s_beta),
      std::log(static_cast<double>(X_step2.cols())));
  out.kind = CalibratedConstant::Kind::c_l;
  return out;
}

confset::BallCS oracle_lasso_cs(const Dataset& data_full, int s_beta,
                                const solvers::LambdaRule& rule, double alpha,
                                const CalibratedConstant& c_o, numkit::RngStream rng) {
  const Index n = data_full.n();
  const Index p = data_full.p();
  confset::BallCS ball;
  if (s_beta == 0) {
    ball.center = Vector::Zero(n);  // null fit at lambda_max
    ball.radius = 0.0;
    return ball;
  }
  const double sigma = std::sqrt(data_full.sigma2);
  const double lambda = solvers::select_lambda(data_full.X, data_full.y, sigma, rule, rng);
  const solvers::PenalizedFit fit = solvers::lasso(data_full.X, data_full.y, lambda);
  ball.center = data_full.X * fit.coefficients;
  ball.radius = std::sqrt(c_o.value * data_full.sigma2 * s_beta *
                          std::log(static_cast<double>(p)) / static_cast<double>(n));
  return ball;
}

ProjectedLassoFit projected_lasso(const Matrix& X, const Vector& y,
                                  const numkit::OrthoBasis& basis, double lambda2) {
  const Index n = X.rows();
  const Index p = X.cols();
  const Index k = basis.k;
  require(k < n, "projected_lasso: empty complement");

  ProjectedLassoFit out;
  if (k == 0) {
    const solvers::PenalizedFit fit = solvers::lasso(X, y, lambda2);
    out.beta = fit.coefficients;
    out.mu_perp_hat = X * fit.coefficients;
    return out;
  }

  const Matrix V = numkit::complement_basis(basis);  // n x (n-k)
  std::vector<char> in_A(static_cast<std::size_t>(p), 0);
  for (Index idx : basis.source_indices) in_A[static_cast<std::size_t>(idx)] = 1;
  std::vector<Index> comp;
  comp.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    if (!in_A[static_cast<std::size_t>(j)]) comp.push_back(j);
  }

  Matrix W(n - k, static_cast<Index>(comp.size()));
  for (std::size_t j = 0; j < comp.size(); ++j) {
    W.col(static_cast<Index>(j)) = V.transpose() * X.col(comp[j]);
  }
  const Vector v_y = V.transpose() * y;

  // The projected objective keeps the 1/(2n) scaling of the ambient problem;
  // in the (n-k)-row reduced convention that is lambda2 * n / (n-k).
  const double lambda_red = lambda2 * static_cast<double>(n) / static_cast<double>(n - k);
  const solvers::PenalizedFit fit = solvers::lasso(W, v_y, lambda_red);

  out.beta = Vector::Zero(p);
  for (std::size_t j = 0; j < comp.size(); ++j) {
    out.beta[comp[j]] = fit.coefficients[static_cast<Index>(j)];
  }
  out.mu_perp_hat = V * (W * fit.coefficients);
  return out;
}

namespace {

// Keep the s_beta - 1 largest coefficients (by magnitude) of the candidate.
IndexSet trim_candidate(const IndexSet& A, const Vector& coeffs, int s_beta) {
  if (static_cast<int>(A.size()) <= s_beta - 1) return A;
  IndexSet sorted = A;
  std::sort(sorted.begin(), sorted.end(), [&](Index a, Index b) {
    const double da = std::abs(coeffs[a]);
    const double db = std::abs(coeffs[b]);
    if (da != db) return da > db;
    return a < b;
  });
  sorted.resize(static_cast<std::size_t>(s_beta - 1));
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

}  // namespace

confset::EllipsoidCS two_step_lasso_cs(const Dataset& fit_half, const Dataset& eval_half,
                                       int s_beta, double alpha, confset::Criterion criterion,
                                       const solvers::LambdaRule& rule, numkit::RngStream rng,
                                       const TslOptions& opt) {
  require(s_beta >= 1, "two_step_lasso_cs: s_beta must be >= 1");
  const int n = static_cast<int>(eval_half.n());
  const int p = static_cast<int>(eval_half.p());
  const double sigma2 = eval_half.sigma2;
  const double sigma = std::sqrt(sigma2);

  std::vector<double> a_grid = opt.a_grid;
  if (a_grid.empty()) {
    for (int i = 0; i <= 80; ++i) a_grid.push_back(0.05 * i);
  }

  const double lambda_prime =
      solvers::select_lambda(fit_half.X, fit_half.y, sigma, rule, rng.substream(1));
  const solvers::PenalizedFit fit_prime = solvers::lasso(fit_half.X, fit_half.y, lambda_prime);

  std::vector<IndexSet> raw =
      confset::generate_candidates(fit_prime.coefficients, lambda_prime, a_grid);
  std::vector<IndexSet> candidates;
  {
    std::set<IndexSet> seen;
    for (const IndexSet& A : raw) {
      IndexSet trimmed = trim_candidate(A, fit_prime.coefficients, s_beta);
      if (seen.insert(trimmed).second) candidates.push_back(std::move(trimmed));
    }
  }

  std::map<int, double> cl_by_rank;  // one calibration per projected-rank bucket
  std::vector<confset::EllipsoidCS> sets;
  sets.reserve(candidates.size());
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    const confset::CandidateSet cand = confset::make_candidate(eval_half.X, candidates[m]);
    const int k = static_cast<int>(cand.k());
    const double df = static_cast<double>(n - k);
    const double lambda2 =
        opt.K * sigma * std::sqrt(std::log(static_cast<double>(p - k)) / n);

    const ProjectedLassoFit step2 = projected_lasso(eval_half.X, eval_half.y, cand.basis, lambda2);

    double cl;
    if (auto it = cl_by_rank.find(k); it != cl_by_rank.end()) {
      cl = it->second;
    } else {
      // Calibrate on the reduced design in its own 1/(2(n-k)) convention.
      const Matrix V = numkit::complement_basis(cand.basis);
      std::vector<char> in_A(static_cast<std::size_t>(p), 0);
      for (Index idx : cand.basis.source_indices) in_A[static_cast<std::size_t>(idx)] = 1;
      Matrix W(n - k, p - k);
      Index col = 0;
      for (Index j = 0; j < p; ++j) {
        if (!in_A[static_cast<std::size_t>(j)]) W.col(col++) = V.transpose() * eval_half.X.col(j);
      }
      const double lambda_sim = opt.nu * opt.K * sigma2 *
                                std::sqrt(std::log(static_cast<double>(p - k)) / n) *
                                static_cast<double>(n) / df;
      const CalibratedConstant c = estimate_cl(W, fit_half.X, fit_half.y, s_beta - k, lambda_sim,
                                               alpha / 2.0, opt.n_sim_cl,
                                               rng.substream(100 + static_cast<std::uint64_t>(k)),
                                               sigma2);
      cl = c.value;
      cl_by_rank.emplace(k, cl);
    }

    // Base radii at c = 1.
    const double rA2_t =
        (k >= 1) ? sigma2 * numkit::chi2_quantile(k, 1.0 - alpha / 2.0) / n : 0.0;
    const double rp2_t =
        cl * sigma2 * (s_beta - k) * std::log(static_cast<double>(p - k)) / n;

    confset::EllipsoidCS cs;
    cs.basis = cand.basis;
    cs.n = n;
    cs.provenance = static_cast<int>(m);
    cs.mu_A_hat = cand.basis.project(eval_half.y);
    cs.mu_perp_hat = step2.mu_perp_hat;
    if (k == 0) {
      if (criterion == confset::Criterion::volume) {
        cs.c1 = opt.E;
        cs.c2 = opt.E / (opt.E - 1.0);
      } else {
        cs.c1 = std::numeric_limits<double>::infinity();
        cs.c2 = 1.0;
      }
      cs.r_A = 0.0;
      cs.r_perp = std::sqrt(cs.c2 * rp2_t);
    } else if (criterion == confset::Criterion::volume) {
      auto [c1, c2] = confset::choose_constants_volume(std::sqrt(rA2_t), std::sqrt(rp2_t), k, n,
                                                       opt.E);
      cs.c1 = c1;
      cs.c2 = c2;
      cs.r_A = std::sqrt(c1 * rA2_t);
      cs.r_perp = std::sqrt(c2 * rp2_t);
    } else {
      auto [c1, c2] = confset::choose_constants_diameter(std::sqrt(rA2_t), std::sqrt(rp2_t));
      cs.c1 = c1;
      cs.c2 = c2;
      cs.r_A = cs.r_perp = std::sqrt(rA2_t + rp2_t);
    }
    sets.push_back(std::move(cs));
  }

  return confset::select_best(sets, criterion);
}

}  // namespace honestsets::competitors
