#include "honestsets/rng.hpp"

#include <stdexcept>

namespace honestsets::numkit {

double sample_noncentral_chi2(int df, double noncentrality, RngEngine& eng) {
  if (df < 1) throw std::domain_error("sample_noncentral_chi2: df must be >= 1");
  if (noncentrality < 0.0) throw std::domain_error("sample_noncentral_chi2: noncentrality < 0");
  const double shift = std::sqrt(noncentrality);
  double sum = 0.0;
  for (int i = 0; i < df; ++i) {
    double z = eng.normal();
    if (i == 0) z += shift;
    sum += z * z;
  }
  return sum;
}

MonteCarloMean mean_inverse_noncentral_chi2(int df, double noncentrality, int n_draws,
                                            RngEngine& eng) {
  if (df <= 2) throw std::domain_error("mean_inverse_noncentral_chi2: df must exceed 2");
  if (n_draws < 1) throw std::domain_error("mean_inverse_noncentral_chi2: n_draws must be >= 1");
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    const double v = df / sample_noncentral_chi2(df, noncentrality, eng);
    sum += v;
    sumsq += v * v;
  }
  MonteCarloMean out;
  out.value = sum / n_draws;
  const double var = (sumsq - sum * sum / n_draws) / (n_draws - 1);
  out.std_error = std::sqrt(var / n_draws);
  return out;
}

}  // namespace honestsets::numkit
