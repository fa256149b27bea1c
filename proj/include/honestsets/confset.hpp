#pragma once

#include <utility>
#include <vector>

#include "honestsets/basis.hpp"
#include "honestsets/stein.hpp"
#include "honestsets/types.hpp"

namespace honestsets::confset {

// Index set A with an orthonormal basis of span(X_A). The indices come from
// the held-out half; the basis is built from the evaluation-half design.
struct CandidateSet {
  IndexSet indices;
  numkit::OrthoBasis basis;

  Index k() const { return basis.k; }
};

CandidateSet make_candidate(const Matrix& X, IndexSet indices, double tol = 1e-10);

enum class Criterion { volume, diameter };

// Two-radius ellipsoid for the mean: the strong-signal block lives in
// span(basis.Q) with radius r_A, the complement block has radius r_perp.
// Membership: ||P_A mu - mu_A_hat||^2/(n r_A^2) + ||P_perp mu - mu_perp_hat||^2/(n r_perp^2) <= 1.
struct EllipsoidCS {
  numkit::OrthoBasis basis;
  Vector mu_A_hat;
  Vector mu_perp_hat;
  double r_A = 0.0;
  double r_perp = 0.0;
  int n = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  int provenance = -1;  // candidate index m

  Index k() const { return basis.k; }
  Index card_A() const { return static_cast<Index>(basis.source_indices.size()); }
};

// Normalized ball {mu : ||mu - center||^2 / n <= radius^2}.
struct BallCS {
  Vector center;
  double radius = 0.0;
};

// r_A for one candidate: k = 0 -> 0, else sqrt(c1 sigma^2 chi2_{k,1-alpha/2} / n).
double radius_A_single(int k, int n, double sigma2, double alpha, double c1);

// Union-bound form over M candidate sets:
// r_A^2 = c1 (sigma^2/n) (k + 2 sqrt(k ln(4M/alpha))).
double radius_A_multi(int k, int n, double sigma2, double alpha, double c1, int M);

// Constrained optimum of the log-volume over 1/c1 + 1/c2 = 1, 1 < c <= E:
// c1 = E/(E-1) v (n/k ^ E), c2 = E/(E-1) v (n/(n-k) ^ E).
std::pair<double, double> choose_constants_volume(double r_tilde_A, double r_tilde_perp, int k,
                                                  int n, double E);

// Diameter-minimizing choice: c1 = (a+b)/a, c2 = (a+b)/b with a = r_tilde_A^2,
// b = r_tilde_perp^2; the resulting set is a ball of radius sqrt(a+b).
std::pair<double, double> choose_constants_diameter(double r_tilde_A, double r_tilde_perp);

struct BuildOptions {
  Criterion criterion = Criterion::volume;
  double E = 10.0;
  bool strict_multi = false;  // use the union-bound radii
  int M = 1;                  // candidate count when strict_multi
  double cm = -1.0;           // multi-set deviation constant; < 0 means cs.value
};

// One pass of the two-step construction for a fixed candidate: project, shrink
// the complement, pick (c1, c2) by the criterion, assemble the ellipsoid.
// cs must be calibrated at alpha/2.
EllipsoidCS build_two_step(const Dataset& data, const CandidateSet& cand, double alpha,
                           const stein::SureConstant& cs, const BuildOptions& opt);

EllipsoidCS build_two_step(const Dataset& data, const CandidateSet& cand, double alpha,
                           Criterion criterion, const stein::SureConstant& cs, double E = 10.0);

// A_m = {j : |coeffs_j| > a_m * lambda}, deduplicated preserving first
// occurrence; may include the empty set.
std::vector<IndexSet> generate_candidates(const Vector& coeffs, double lambda,
                                          const std::vector<double>& a_grid);

// argmin of log-volume (k ln r_A + (n-k) ln r_perp, ball -> n ln r_perp) or of
// the diameter 2 max(r_A, r_perp). Ties: smaller k, then smaller provenance.
const EllipsoidCS& select_best(const std::vector<EllipsoidCS>& sets, Criterion criterion);

bool contains(const EllipsoidCS& cs, const Vector& mu);
bool contains(const BallCS& ball, const Vector& mu);

struct Geometry {
  double diameter = 0.0;
  double log_volume_normalized = 0.0;
  double geo_avg_radius = 0.0;
};

Geometry geometry(const EllipsoidCS& cs);

// {mu : ||y - mu||^2 <= sigma^2 chi2_{n,1-alpha}} as a normalized ball.
BallCS naive_chi2_ball(const Vector& y, double sigma2, double alpha);

// 4 sigma^2 max{c1 chi2_{k,alpha/2}/n,
//               c2 ((n-k)/n)(1 - E[(n-k)/chi2_{n-k}(rho)] + cs (n-k)^{-1/2})},
// the inner expectation estimated by Monte Carlo. Untruncated-risk expression.
double expected_sq_diameter(int k, int n, double sigma2, double alpha, double c1, double c2,
                            double cs, double rho, int n_draws, numkit::RngStream rng);

}  // namespace honestsets::confset
