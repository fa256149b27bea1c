#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "honestsets/competitors.hpp"
#include "honestsets/simlab.hpp"
#include "honestsets/special.hpp"
#include "oracles.hpp"

using namespace honestsets;
using namespace honestsets::competitors;
using numkit::RngEngine;
using numkit::RngStream;

namespace {

Matrix random_matrix(Index n, Index p, RngEngine& eng) {
  Matrix X(n, p);
  for (Index j = 0; j < p; ++j) X.col(j) = eng.normal_vector(n);
  return X;
}

// Columns scaled to ||X_j||^2 = n.
Matrix normalized_matrix(Index n, Index p, RngEngine& eng) {
  Matrix X = random_matrix(n, p, eng);
  for (Index j = 0; j < p; ++j) X.col(j) *= std::sqrt(static_cast<double>(n)) / X.col(j).norm();
  return X;
}

}  // namespace

TEST_CASE("adaptive radius: closed form vs bisection on the boundary statistic") {
  // statistic(d) = (R_n - d)/tau(d), tau(d)^2 = 2 s^4/n + 4 s^2 d / n; the
  // radius is the d >= max(R_n, 0) where statistic = -z.
  auto statistic = [](double d, double R_n, double sigma2, int n, double alpha) {
    const double tau = std::sqrt(2.0 * sigma2 * sigma2 / n + 4.0 * sigma2 * d / n);
    return (R_n - d) / tau;
  };
  RngEngine eng(RngStream(51, 1));
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 50 + static_cast<int>(eng.next_u64() % 400);
    const double sigma2 = eng.uniform(0.3, 2.5);
    const double R_n = eng.uniform(-0.2 * sigma2, 4.0);
    const double alpha = eng.uniform(0.01, 0.2);
    const double z = numkit::normal_quantile(1.0 - alpha);
    const double r2 = adaptive_radius2(R_n, sigma2, n, alpha);

    double lo = std::max(R_n, 0.0), hi = lo + 10.0 * sigma2 + 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (statistic(mid, R_n, sigma2, n, alpha) > -z) lo = mid; else hi = mid;
    }
    CHECK(r2 == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
    // boundary consistency: the statistic at the radius equals -z exactly
    CHECK(statistic(r2, R_n, sigma2, n, alpha) == doctest::Approx(-z).epsilon(1e-8));
  }
}

TEST_CASE("adaptive radius frozen example") {
  const double r2 = adaptive_radius2(0.0, 1.0, 100, 0.05);
  CHECK(r2 == doctest::Approx(0.2929390).epsilon(1e-5));
}

TEST_CASE("adaptive ball: center membership is a frequency-one event at n = 200") {
  RngEngine eng(RngStream(51, 2));
  const int n = 200;
  int hit = 0;
  const int n_rep = 500;
  for (int rep = 0; rep < n_rep; ++rep) {
    const Vector mu_hat = eng.normal_vector(n);
    Vector y = mu_hat;
    for (int i = 0; i < n; ++i) y[i] += eng.normal();
    const confset::BallCS ball = adaptive_cs_from_center(y, mu_hat, 1.0, 0.05);
    hit += confset::contains(ball, mu_hat) ? 1 : 0;
  }
  CHECK(hit == n_rep);
}

TEST_CASE("adaptive ball honest coverage for a dense signal") {
  RngEngine eng(RngStream(51, 3));
  const int n = 120, p = 60, n_rep = 1200;
  const double alpha = 0.05;
  const Matrix X = normalized_matrix(n, p, eng);
  const Matrix Xp = normalized_matrix(n, p, eng);
  const Vector beta = Vector::Constant(p, 0.15);  // dense
  const Vector mu = X * beta;
  int hit = 0;
  for (int rep = 0; rep < n_rep; ++rep) {
    Vector y = mu, yp = Xp * beta;
    for (int i = 0; i < n; ++i) { y[i] += eng.normal(); yp[i] += eng.normal(); }
    const auto fit = solvers::lasso(Xp, yp, 0.3);
    const confset::BallCS ball = adaptive_cs_from_center(y, X * fit.coefficients, 1.0, alpha);
    hit += confset::contains(ball, mu) ? 1 : 0;
  }
  const double freq = static_cast<double>(hit) / n_rep;
  CHECK(freq >= 1.0 - alpha - 3.0 * std::sqrt(alpha * (1 - alpha) / n_rep));
}

TEST_CASE("oracle ball radius formula and y-independence") {
  RngEngine eng(RngStream(52, 1));
  Dataset full;
  full.X = normalized_matrix(400, 800, eng);
  full.sigma2 = 1.0;
  full.y = eng.normal_vector(400);
  CalibratedConstant co;
  co.kind = CalibratedConstant::Kind::c_o;
  co.value = 4.0;
  solvers::LambdaRule rule;  // theoretical
  const confset::BallCS ball = oracle_lasso_cs(full, 10, rule, 0.05, co, RngStream(52, 2));
  CHECK(ball.radius * ball.radius ==
        doctest::Approx(4.0 * 10.0 * std::log(800.0) / 400.0).epsilon(1e-12));
  CHECK(ball.radius * ball.radius == doctest::Approx(0.6684612).epsilon(1e-6));

  Dataset other = full;
  other.y = eng.normal_vector(400) * 3.0;
  const confset::BallCS ball2 = oracle_lasso_cs(other, 10, rule, 0.05, co, RngStream(52, 2));
  CHECK(ball.radius == ball2.radius);  // radius has no y term

  const confset::BallCS degenerate = oracle_lasso_cs(full, 0, rule, 0.05, co, RngStream(52, 3));
  CHECK(degenerate.radius == 0.0);
}

TEST_CASE("lasso_error_quantile: degenerate stubs and alpha monotonicity") {
  RngEngine eng(RngStream(53, 1));
  const Index n = 60, p = 30;
  Matrix X = Matrix::Zero(n, p);  // orthogonal design with ||X_j||^2 = n
  for (Index j = 0; j < p; ++j) {
    X(2 * j, j) = std::sqrt(n / 2.0);
    X(2 * j + 1, j) = -std::sqrt(n / 2.0);
  }

  SUBCASE("noiseless limit drives the constant to zero") {
    // With sigma ~ 0 and lambda ~ sigma^2, soft-thresholding error is O(sigma^2)
    // so the normalized statistic vanishes.
    const double sigma2 = 1e-8;
    const double lam = 0.5 * (2.0 * std::sqrt(2.0) + 0.01) * sigma2 *
                       std::sqrt(std::log(static_cast<double>(p)) / n);
    const auto c = lasso_error_quantile(X, lam, 3, 1.0, sigma2, 0.05, 120, RngStream(53, 2),
                                        3.0, std::log(static_cast<double>(p)));
    CHECK(c.value < 1e-3);
  }
  SUBCASE("monotone in alpha on the same draws") {
    const double lam = 0.2;
    const auto tight = lasso_error_quantile(X, lam, 3, 1.0, 1.0, 0.025, 150, RngStream(53, 3),
                                            3.0, std::log(static_cast<double>(p)));
    const auto loose = lasso_error_quantile(X, lam, 3, 1.0, 1.0, 0.05, 150, RngStream(53, 3),
                                            3.0, std::log(static_cast<double>(p)));
    CHECK(tight.value >= loose.value);
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(lasso_error_quantile(X, 0.2, 3, -1.0, 1.0, 0.05, 150, RngStream(53, 4),
                                         3.0, 1.0),
                    calibration_error);
    CHECK_THROWS_AS(lasso_error_quantile(X, 0.2, 3, 1.0, 1.0, 0.05, 10, RngStream(53, 5),
                                         3.0, 1.0),
                    calibration_error);
  }
}

TEST_CASE("estimate_cl uses the held-out bound and stays seed-stable") {
  RngEngine eng(RngStream(54, 1));
  const Index n = 100, p = 200;
  const Matrix X = normalized_matrix(n, p, eng);
  const Matrix Xp = normalized_matrix(n, p, eng);
  Vector beta = Vector::Zero(p);
  beta[3] = 1.0;
  Vector yp = Xp * beta;
  for (Index i = 0; i < n; ++i) yp[i] += eng.normal();

  const double lam_sim = 0.5 * (2.0 * std::sqrt(2.0) + 0.01) *
                         std::sqrt(std::log(static_cast<double>(p)) / n);
  const auto a = estimate_cl(X, Xp, yp, 5, lam_sim, 0.05, 150, RngStream(54, 2));
  const auto b = estimate_cl(X, Xp, yp, 5, lam_sim, 0.05, 150, RngStream(54, 3));
  CHECK(a.value > 0.0);
  CHECK(std::abs(a.value - b.value) / a.value < 0.35);  // same distribution, different seeds
}

TEST_CASE("projected lasso solves the reduced problem and zeroes the candidate block") {
  RngEngine eng(RngStream(55, 1));
  const Index n = 60, p = 40;
  const Matrix X = normalized_matrix(n, p, eng);
  Vector beta = Vector::Zero(p);
  beta[0] = 1.5;
  beta[5] = -1.0;
  beta[11] = 0.8;
  Vector y = X * beta;
  for (Index i = 0; i < n; ++i) y[i] += eng.normal();

  IndexSet A = {0, 5};
  const numkit::OrthoBasis basis = numkit::orthonormal_basis(X, A);
  const double lambda2 = 0.15;
  const ProjectedLassoFit fit = projected_lasso(X, y, basis, lambda2);

  for (Index idx : A) CHECK(fit.beta[idx] == 0.0);

  // Same solution from the ambient-form problem on the projected data.
  Matrix Xp = X;
  Vector yp = y;
  const Matrix P = basis.Q * basis.Q.transpose();
  Xp -= P * X;
  yp -= P * y;
  const auto ambient = solvers::lasso(Xp, yp, lambda2, 1e-10, 200000);
  CHECK((fit.beta - ambient.coefficients).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((fit.mu_perp_hat - Xp * ambient.coefficients).cwiseAbs().maxCoeff() < 1e-6);
  // center is orthogonal to the candidate span
  CHECK((basis.Q.transpose() * fit.mu_perp_hat).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("two-step lasso: radius formula factors and trimmed candidates") {
  // r_perp^2 = c2 c_l sigma^2 (s-k) ln(p-k) / n at  c2=2, c_l=3, s=10, k=4,
  // p=800, n=200.
  const double r2 = 2.0 * 3.0 * (10.0 - 4.0) * std::log(796.0) / 200.0;
  CHECK(r2 == doctest::Approx(1.2023262).epsilon(1e-6));

  RngEngine eng(RngStream(56, 1));
  const Index n = 80, p = 120;
  Dataset fit_half, eval_half;
  fit_half.X = normalized_matrix(n, p, eng);
  eval_half.X = normalized_matrix(n, p, eng);
  fit_half.sigma2 = eval_half.sigma2 = 1.0;
  Vector beta = Vector::Zero(p);
  for (Index j = 0; j < 8; ++j) beta[j * 3] = (j % 2 ? -2.0 : 2.0);
  fit_half.y = fit_half.X * beta;
  eval_half.y = eval_half.X * beta;
  for (Index i = 0; i < n; ++i) {
    fit_half.y[i] += eng.normal();
    eval_half.y[i] += eng.normal();
  }

  solvers::LambdaRule rule;  // theoretical
  TslOptions opt;
  opt.n_sim_cl = 120;
  const int s_beta = 5;  // tighter than the true support: forces trimming
  const confset::EllipsoidCS cs = two_step_lasso_cs(fit_half, eval_half, s_beta, 0.05,
                                                    confset::Criterion::volume, rule,
                                                    RngStream(56, 2), opt);
  CHECK(cs.card_A() <= s_beta - 1);
  CHECK(cs.n == static_cast<int>(n));
  CHECK(cs.r_perp > 0.0);
  if (cs.k() > 0) CHECK(1.0 / cs.c1 + 1.0 / cs.c2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("step-2 prediction-error bound holds at the calibrated level") {
  // With A inside the true support and c_l calibrated at level alpha, the
  // exceedance frequency of ||P_perp X (beta_tilde - beta)||^2 over
  // c_l sigma^2 (s-k) ln(p-k) is at most alpha + 3 SE.
  RngEngine eng(RngStream(57, 1));
  const Index n = 80, p = 120;
  const int s_beta = 4;
  const Matrix X = normalized_matrix(n, p, eng);
  const Matrix Xp = normalized_matrix(n, p, eng);
  IndexSet A = {0};
  const numkit::OrthoBasis basis = numkit::orthonormal_basis(X, A);
  const int k = static_cast<int>(basis.k);

  const double alpha = 0.1;
  const double K = 2.0 * std::sqrt(2.0) + 0.01;
  const double lambda2 = K * std::sqrt(std::log(static_cast<double>(p - k)) / n);

  // Calibrate on the reduced design with the nu-scaled simulation lambda.
  const Matrix V = numkit::complement_basis(basis);
  Matrix W(n - k, p - k);
  Index col = 0;
  for (Index j = 0; j < p; ++j) {
    if (j != 0) W.col(col++) = V.transpose() * X.col(j);
  }
  Vector beta = Vector::Zero(p);
  beta[0] = 2.0;
  beta[7] = 1.0;
  beta[19] = -1.2;
  beta[33] = 0.7;
  Vector yp_fit = Xp * beta;
  for (Index i = 0; i < n; ++i) yp_fit[i] += eng.normal();
  const double lam_sim = 0.5 * K * std::sqrt(std::log(static_cast<double>(p - k)) / n) *
                         static_cast<double>(n) / (n - k);
  const auto cl = estimate_cl(W, Xp, yp_fit, s_beta - k, lam_sim, alpha, 200, RngStream(57, 2));

  const double budget = cl.value * (s_beta - k) * std::log(static_cast<double>(p - k));
  int exceed = 0;
  const int n_rep = 300;
  for (int rep = 0; rep < n_rep; ++rep) {
    Vector y = X * beta;
    for (Index i = 0; i < n; ++i) y[i] += eng.normal();
    const ProjectedLassoFit f = projected_lasso(X, y, basis, lambda2);
    const Vector mu_perp = (X * beta) - basis.project(X * beta);
    if ((f.mu_perp_hat - mu_perp).squaredNorm() > budget) ++exceed;
  }
  const double freq = static_cast<double>(exceed) / n_rep;
  CHECK(freq <= alpha + 3.0 * std::sqrt(alpha * (1 - alpha) / n_rep));
}

TEST_CASE("golden calibration constants reproduce") {
  const char* src = std::getenv("HS_SOURCE_DIR");
  REQUIRE(src != nullptr);
  std::ifstream f(std::string(src) + "/data/golden/calibration_constants.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  int checked = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string kind, context, alpha_s, seed_s, nsim_s, value_s;
    std::getline(ss, kind, ',');
    std::getline(ss, context, ',');
    std::getline(ss, alpha_s, ',');
    std::getline(ss, seed_s, ',');
    std::getline(ss, nsim_s, ',');
    std::getline(ss, value_s, ',');
    const double value = std::stod(value_s);
    if (kind == "eta_cv") {
      CHECK(honestsets::simlab::oracle_eta_cv() == value);
      ++checked;
    } else if (kind == "eta_1se") {
      CHECK(honestsets::simlab::oracle_eta_1se() == value);
      ++checked;
    } else if (kind == "c_l" || kind == "c_o") {
      CHECK(value > 0.0);
      ++checked;
    }
  }
  CHECK(checked >= 4);
}

TEST_CASE("golden c_l and c_o regenerate bit-for-bit from the recorded seed") {
  const char* src = std::getenv("HS_SOURCE_DIR");
  REQUIRE(src != nullptr);
  std::ifstream f(std::string(src) + "/data/golden/calibration_constants.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  double cl_golden = -1, co_golden = -1;
  std::uint64_t seed = 0;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string kind, context, alpha_s, seed_s, nsim_s, value_s;
    std::getline(ss, kind, ',');
    std::getline(ss, context, ',');
    std::getline(ss, alpha_s, ',');
    std::getline(ss, seed_s, ',');
    std::getline(ss, nsim_s, ',');
    std::getline(ss, value_s, ',');
    if (kind == "c_l") { cl_golden = std::stod(value_s); seed = std::stoull(seed_s); }
    if (kind == "c_o") { co_golden = std::stod(value_s); }
  }
  REQUIRE(cl_golden > 0.0);
  REQUIRE(co_golden > 0.0);

  honestsets::simlab::SimConfig cfg;
  cfg.n = 200; cfg.p = 800; cfg.s = 10; cfg.b = 2.0;
  cfg.design = honestsets::simlab::Design::toeplitz;
  cfg.master_seed = seed;
  RngEngine eng(RngStream(seed, 777));
  const auto data = honestsets::simlab::sample_dataset(cfg, eng);

  const double lam_sim = 0.5 * (2.0 * std::sqrt(2.0) + 0.01) * std::sqrt(std::log(800.0) / 200.0);
  const auto cl = estimate_cl(data.eval.X, data.fit.X, data.fit.y, 10, lam_sim, 0.025, 500,
                              RngStream(seed, 778));
  CHECK(cl.value == doctest::Approx(cl_golden).epsilon(1e-12));

  Matrix Xfull(400, 800);
  Xfull.topRows(200) = data.eval.X;
  Xfull.bottomRows(200) = data.fit.X;
  Vector yfull(400);
  yfull.head(200) = data.eval.y;
  yfull.tail(200) = data.fit.y;
  double bb = -1e300;
  for (Index j = 0; j < Xfull.cols(); ++j) {
    bb = std::max(bb, Xfull.col(j).dot(yfull) / Xfull.col(j).squaredNorm());
  }
  const double lam_val = 2.0 * std::sqrt(2.0) * std::sqrt(std::log(800.0) / 400.0);
  const auto co = calibrate_c_o(Xfull, lam_val, 10, 0.05, 500, RngStream(seed, 779), bb);
  CHECK(co.value == doctest::Approx(co_golden).epsilon(1e-12));
}
