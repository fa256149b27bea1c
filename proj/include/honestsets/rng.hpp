#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "honestsets/types.hpp"

namespace honestsets::numkit {

// SplitMix64 finalizer, used for seeding and for hashing (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based stream descriptor: identical (master_seed, stream_id) pairs
// reproduce identical draw sequences, distinct stream_ids are derived through
// an avalanching hash so streams are independent for Monte-Carlo purposes.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  RngStream() = default;
  RngStream(std::uint64_t master, std::uint64_t stream)
      : master_seed(master), stream_id(stream) {}

  RngStream substream(std::uint64_t tag) const {
    return RngStream(master_seed, mix64(stream_id ^ mix64(tag ^ 0xA5A5A5A55A5A5A5AULL)));
  }
};

// xoshiro256** seeded from a hashed (master_seed, stream_id) pair.
class RngEngine {
 public:
  explicit RngEngine(const RngStream& stream) {
    std::uint64_t h = mix64(mix64(stream.master_seed) ^ mix64(stream.stream_id));
    for (auto& word : state_) {
      h = mix64(h);
      word = h;
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0, 1); never returns 0 so logs are safe.
  double uniform() {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Vector normal_vector(Index n) {
    Vector z(n);
    for (Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

  // Fisher-Yates; returns the first k entries of a random permutation of [0, p).
  IndexSet sample_without_replacement(Index p, Index k) {
    std::vector<Index> pool(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) pool[static_cast<std::size_t>(i)] = i;
    IndexSet out(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) {
      const Index j = i + static_cast<Index>(next_u64() % static_cast<std::uint64_t>(p - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
    }
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One draw from the noncentral chi-square chi2_df(rho), realized as ||Z + m||^2
// with Z a standard normal df-vector and ||m||^2 = rho.
double sample_noncentral_chi2(int df, double noncentrality, RngEngine& eng);

struct MonteCarloMean {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of E[df / chi2_df(rho)]; requires df > 2 for a finite mean.
MonteCarloMean mean_inverse_noncentral_chi2(int df, double noncentrality, int n_draws,
                                            RngEngine& eng);

}  // namespace honestsets::numkit
