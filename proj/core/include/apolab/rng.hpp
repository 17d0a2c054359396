#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace apolab {

/// Deterministic random stream. uniform() and normal() are implemented here
/// (not via std distributions) so the exact draw sequence is pinned by this
/// code. fork(tag) derives an independent child stream from (seed, tag);
/// the same (seed, tag) always yields the same stream regardless of how much
/// the parent has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();        // [0, 1), 53-bit resolution
  double normal();         // N(0,1), Box-Muller, two uniforms per draw
  int uniform_int(int n);  // uniform over {0, ..., n-1}, unbiased

  std::uint64_t fork_seed(std::uint64_t tag) const;
  Rng fork(std::uint64_t tag) const { return Rng(fork_seed(tag)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

/// Index of the bucket a uniform draw u falls into under `probs`
/// (inverse-CDF sampling). Residual rounding mass goes to the last bucket.
int categorical_from_uniform(const std::vector<double>& probs, double u);

/// Deterministic Fisher-Yates shuffle driven by rng.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
    int j = rng.uniform_int(i + 1);
    std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
  }
}

}  // namespace apolab
