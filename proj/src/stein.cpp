#include "honestsets/stein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

namespace honestsets::stein {

SteinFit stein_shrink(const Vector& y_perp, int df, double sigma2) {
  require_domain(sigma2 > 0.0, "stein_shrink: sigma2 must be positive");
  require(df >= 1, "stein_shrink: df must be >= 1");

  SteinFit fit;
  fit.df = df;
  const double norm2 = y_perp.squaredNorm();
  if (norm2 == 0.0) {
    fit.B = std::numeric_limits<double>::infinity();
    fit.L_hat = 0.0;
    fit.mu_perp_hat = Vector::Zero(y_perp.size());
    return fit;
  }
  fit.B = df * sigma2 / norm2;
  fit.L_hat = std::max(0.0, 1.0 - fit.B);
  fit.mu_perp_hat = (1.0 - fit.B) * y_perp;
  return fit;
}

double sure_deviation_statistic(double W, int n, bool truncate) {
  const double B = n / W;
  const double raw = 1.0 - B;
  const double L = truncate ? std::max(0.0, raw) : raw;
  const double mu2_over_n = raw * raw * W / n;
  return std::sqrt(static_cast<double>(n)) * std::abs(L - mu2_over_n);
}

double empirical_quantile(std::span<const double> sorted_values, double alpha) {
  const std::size_t N = sorted_values.size();
  require(N > 0, "empirical_quantile: empty sample");
  std::size_t idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(N)));
  if (idx == 0) idx = 1;
  if (idx > N) idx = N;
  return sorted_values[idx - 1];
}

SureConstant estimate_cs_from_draws(double alpha, int n, std::span<const double> chi2_draws,
                                    bool truncate) {
  require(alpha > 0.0 && alpha < 1.0, "estimate_cs: alpha must be in (0,1)");
  require(n >= 2, "estimate_cs: n must be >= 2");
  if (chi2_draws.size() < 100) throw calibration_error("estimate_cs: too few draws for a quantile");

  std::vector<double> stats(chi2_draws.size());
  for (std::size_t j = 0; j < chi2_draws.size(); ++j) {
    stats[j] = sure_deviation_statistic(chi2_draws[j], n, truncate);
  }
  std::sort(stats.begin(), stats.end());

  SureConstant out;
  out.alpha = alpha;
  out.n = n;
  out.n_sim = static_cast<int>(chi2_draws.size());
  out.value = empirical_quantile(stats, alpha);
  return out;
}

SureConstant estimate_cs(double alpha, int n, int n_sim, numkit::RngStream rng, bool truncate) {
  if (n_sim < 100) throw calibration_error("estimate_cs: n_sim too small for a quantile");
  numkit::RngEngine eng(rng);
  std::vector<double> draws(static_cast<std::size_t>(n_sim));
  for (auto& w : draws) w = numkit::sample_noncentral_chi2(n, 0.0, eng);
  return estimate_cs_from_draws(alpha, n, draws, truncate);
}

namespace {
constexpr std::uint64_t kCsStreamTag = 0xC5C5C5C5C5C5C5C5ULL;
}

SureConstant cs_constant_cached(double alpha, int n, int n_sim, std::uint64_t master_seed,
                                bool truncate) {
  using Key = std::tuple<int, std::uint64_t, int, std::uint64_t, bool>;
  static std::map<Key, SureConstant> cache;
  static std::mutex mutex;

  std::uint64_t alpha_bits;
  static_assert(sizeof(alpha_bits) == sizeof(alpha));
  std::memcpy(&alpha_bits, &alpha, sizeof(alpha));
  const Key key{n, alpha_bits, n_sim, master_seed, truncate};

  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const std::uint64_t tag =
      numkit::mix64(kCsStreamTag ^ numkit::mix64(alpha_bits) ^
                    numkit::mix64(static_cast<std::uint64_t>(n)) ^
                    numkit::mix64(static_cast<std::uint64_t>(n_sim) + (truncate ? 1 : 0)));
  SureConstant value = estimate_cs(alpha, n, n_sim, numkit::RngStream(master_seed, tag), truncate);
  cache.emplace(key, value);
  return value;
}

double radius_perp_single(const SteinFit& fit, int n, int k, double sigma2, double c2,
                          const SureConstant& cs) {
  require_domain(c2 > 1.0, "radius_perp_single: c2 must exceed 1");
  require(k < n, "radius_perp_single: k must be < n");
  const double df = static_cast<double>(n - k);
  const double r2 = c2 * (df / n) * sigma2 * (fit.L_hat + cs.value / std::sqrt(df));
  return std::sqrt(std::max(0.0, r2));
}

double radius_perp_multi(const SteinFit& fit, int n, int k, double sigma2, double c2, double cm,
                         int M) {
  require_domain(c2 > 1.0, "radius_perp_multi: c2 must exceed 1");
  require(k < n, "radius_perp_multi: k must be < n");
  require(M >= 1, "radius_perp_multi: M must be >= 1");
  const double df = static_cast<double>(n - k);
  const double allowance = cm * std::pow(static_cast<double>(M), 0.25) / std::sqrt(df);
  const double r2 = c2 * (df / n) * sigma2 * (fit.L_hat + allowance);
  return std::sqrt(std::max(0.0, r2));
}

}  // namespace honestsets::stein
