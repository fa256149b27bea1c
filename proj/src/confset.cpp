#include "honestsets/confset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "honestsets/special.hpp"

namespace honestsets::confset {

CandidateSet make_candidate(const Matrix& X, IndexSet indices, double tol) {
  CandidateSet cand;
  cand.basis = numkit::orthonormal_basis(X, indices, tol);
  cand.indices = std::move(indices);
  return cand;
}

double radius_A_single(int k, int n, double sigma2, double alpha, double c1) {
  require(k >= 0 && k <= n, "radius_A_single: k out of range");
  if (k == 0) return 0.0;
  require_domain(c1 > 1.0, "radius_A_single: c1 must exceed 1");
  const double q = numkit::chi2_quantile(k, 1.0 - alpha / 2.0);
  return std::sqrt(c1 * sigma2 * q / n);
}

double radius_A_multi(int k, int n, double sigma2, double alpha, double c1, int M) {
  require(M >= 1, "radius_A_multi: M must be >= 1");
  if (k == 0) return 0.0;
  require_domain(c1 > 1.0, "radius_A_multi: c1 must exceed 1");
  const double kk = static_cast<double>(k);
  const double r2 = c1 * sigma2 / n * (kk + 2.0 * std::sqrt(kk * std::log(4.0 * M / alpha)));
  return std::sqrt(r2);
}

std::pair<double, double> choose_constants_volume(double /*r_tilde_A*/, double /*r_tilde_perp*/,
                                                  int k, int n, double E) {
  require_domain(E > 2.0, "choose_constants_volume: E must exceed 2");
  require(k >= 1 && k <= n - 1, "choose_constants_volume: k must be in [1, n-1]");
  const double floor_c = E / (E - 1.0);
  const double c1 = std::max(floor_c, std::min(static_cast<double>(n) / k, E));
  const double c2 = std::max(floor_c, std::min(static_cast<double>(n) / (n - k), E));
  return {c1, c2};
}

std::pair<double, double> choose_constants_diameter(double r_tilde_A, double r_tilde_perp) {
  const double a = r_tilde_A * r_tilde_A;
  const double b = r_tilde_perp * r_tilde_perp;
  require(a > 0.0 || b > 0.0, "choose_constants_diameter: both radii zero");
  const double s = a + b;
  const double c1 = (a > 0.0) ? s / a : std::numeric_limits<double>::infinity();
  const double c2 = (b > 0.0) ? s / b : std::numeric_limits<double>::infinity();
  return {c1, c2};
}

EllipsoidCS build_two_step(const Dataset& data, const CandidateSet& cand, double alpha,
                           const stein::SureConstant& cs, const BuildOptions& opt) {
  const int n = static_cast<int>(data.n());
  const int k = static_cast<int>(cand.k());
  require(k < n, "build_two_step: candidate spans the whole space");
  require(alpha > 0.0 && alpha < 1.0, "build_two_step: alpha must be in (0,1)");

  EllipsoidCS out;
  out.basis = cand.basis;
  out.n = n;
  out.mu_A_hat = cand.basis.project(data.y);
  const Vector y_perp = data.y - out.mu_A_hat;
  const stein::SteinFit fit = stein::stein_shrink(y_perp, n - k, data.sigma2);
  out.mu_perp_hat = fit.mu_perp_hat;

  const double cm = (opt.cm >= 0.0) ? opt.cm : cs.value;
  const double df = static_cast<double>(n - k);

  // Base radii at c = 1.
  double rA2_t = 0.0;
  if (k >= 1) {
    rA2_t = opt.strict_multi
                ? data.sigma2 / n * (k + 2.0 * std::sqrt(k * std::log(4.0 * opt.M / alpha)))
                : data.sigma2 * numkit::chi2_quantile(k, 1.0 - alpha / 2.0) / n;
  }
  const double allowance = opt.strict_multi
                               ? cm * std::pow(static_cast<double>(opt.M), 0.25) / std::sqrt(df)
                               : cs.value / std::sqrt(df);
  const double rp2_t = (df / n) * data.sigma2 * (fit.L_hat + allowance);

  if (k == 0) {
    // Ball: the criterion's r_tilde_A -> 0 limit.
    if (opt.criterion == Criterion::volume) {
      out.c1 = opt.E;
      out.c2 = opt.E / (opt.E - 1.0);
    } else {
      out.c1 = std::numeric_limits<double>::infinity();
      out.c2 = 1.0;
    }
    out.r_A = 0.0;
    out.r_perp = std::sqrt(out.c2 * rp2_t);
    return out;
  }

  if (opt.criterion == Criterion::volume) {
    auto [c1, c2] = choose_constants_volume(std::sqrt(rA2_t), std::sqrt(rp2_t), k, n, opt.E);
    out.c1 = c1;
    out.c2 = c2;
    out.r_A = std::sqrt(c1 * rA2_t);
    out.r_perp = std::sqrt(c2 * rp2_t);
  } else {
    auto [c1, c2] = choose_constants_diameter(std::sqrt(rA2_t), std::sqrt(rp2_t));
    out.c1 = c1;
    out.c2 = c2;
    out.r_A = out.r_perp = std::sqrt(rA2_t + rp2_t);
  }
  return out;
}

EllipsoidCS build_two_step(const Dataset& data, const CandidateSet& cand, double alpha,
                           Criterion criterion, const stein::SureConstant& cs, double E) {
  BuildOptions opt;
  opt.criterion = criterion;
  opt.E = E;
  return build_two_step(data, cand, alpha, cs, opt);
}

std::vector<IndexSet> generate_candidates(const Vector& coeffs, double lambda,
                                          const std::vector<double>& a_grid) {
  require(!a_grid.empty(), "generate_candidates: empty threshold grid");
  std::vector<IndexSet> out;
  std::set<IndexSet> seen;
  for (double a : a_grid) {
    require(a >= 0.0, "generate_candidates: thresholds must be non-negative");
    IndexSet A;
    for (Index j = 0; j < coeffs.size(); ++j) {
      if (std::abs(coeffs[j]) > a * lambda) A.push_back(j);
    }
    if (seen.insert(A).second) out.push_back(std::move(A));
  }
  return out;
}

namespace {

double selection_score(const EllipsoidCS& cs, Criterion criterion) {
  if (criterion == Criterion::diameter) return 2.0 * std::max(cs.r_A, cs.r_perp);
  if (cs.k() == 0) return cs.n * std::log(cs.r_perp);
  return cs.k() * std::log(cs.r_A) + (cs.n - cs.k()) * std::log(cs.r_perp);
}

}  // namespace

const EllipsoidCS& select_best(const std::vector<EllipsoidCS>& sets, Criterion criterion) {
  require(!sets.empty(), "select_best: empty candidate list");
  std::size_t best = 0;
  double best_score = selection_score(sets[0], criterion);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const double score = selection_score(sets[i], criterion);
    const bool better =
        score < best_score ||
        (score == best_score && (sets[i].k() < sets[best].k() ||
                                 (sets[i].k() == sets[best].k() &&
                                  sets[i].provenance < sets[best].provenance)));
    if (better) {
      best = i;
      best_score = score;
    }
  }
  return sets[best];
}

namespace {

// norm2 / (n r^2) with the r = 0 edge mapped to {0, +inf}.
double quad_term(double norm2, int n, double r) {
  const double r2n = n * r * r;
  if (r2n > 0.0) return norm2 / r2n;
  return norm2 == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

bool contains(const EllipsoidCS& cs, const Vector& mu) {
  require(mu.size() == cs.mu_perp_hat.size(), "contains: dimension mismatch");
  require(mu.allFinite(), "contains: non-finite input");
  const Vector mu_A = cs.basis.project(mu);
  double total = 0.0;
  if (cs.k() > 0) total += quad_term((mu_A - cs.mu_A_hat).squaredNorm(), cs.n, cs.r_A);
  total += quad_term((mu - mu_A - cs.mu_perp_hat).squaredNorm(), cs.n, cs.r_perp);
  return total <= 1.0;
}

bool contains(const BallCS& ball, const Vector& mu) {
  require(mu.size() == ball.center.size(), "contains: dimension mismatch");
  const double n = static_cast<double>(ball.center.size());
  return (mu - ball.center).squaredNorm() / n <= ball.radius * ball.radius;
}

Geometry geometry(const EllipsoidCS& cs) {
  Geometry g;
  g.diameter = 2.0 * std::max(cs.r_A, cs.r_perp);
  const double n = static_cast<double>(cs.n);
  const double kA = static_cast<double>(cs.card_A());
  if (cs.k() == 0) {
    g.log_volume_normalized = n * std::log(cs.r_perp);
    g.geo_avg_radius = cs.r_perp;
  } else {
    g.log_volume_normalized = cs.k() * std::log(cs.r_A) + (cs.n - cs.k()) * std::log(cs.r_perp);
    g.geo_avg_radius =
        std::exp((kA * std::log(cs.r_A) + (n - kA) * std::log(cs.r_perp)) / n);
  }
  return g;
}

BallCS naive_chi2_ball(const Vector& y, double sigma2, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "naive_chi2_ball: alpha must be in (0,1)");
  const int n = static_cast<int>(y.size());
  BallCS ball;
  ball.center = y;
  ball.radius = std::sqrt(sigma2 * numkit::chi2_quantile(n, 1.0 - alpha) / n);
  return ball;
}

double expected_sq_diameter(int k, int n, double sigma2, double alpha, double c1, double c2,
                            double cs, double rho, int n_draws, numkit::RngStream rng) {
  require_domain(n - k > 2, "expected_sq_diameter: n - k must exceed 2");
  require(rho >= 0.0, "expected_sq_diameter: rho must be non-negative");

  const double strong =
      (k >= 1) ? c1 * numkit::chi2_quantile(k, 1.0 - alpha / 2.0) / n : 0.0;

  numkit::RngEngine eng(rng);
  const numkit::MonteCarloMean inv =
      numkit::mean_inverse_noncentral_chi2(n - k, rho, n_draws, eng);
  const double df = static_cast<double>(n - k);
  const double weak = c2 * (df / n) * (1.0 - inv.value + cs / std::sqrt(df));

  return 4.0 * sigma2 * std::max(strong, weak);
}

}  // namespace honestsets::confset
