#include "apolab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apolab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t reject_below = (-un) % un;  // 2^64 - reject_below is a multiple of n
  std::uint64_t r = next_u64();
  while (r < reject_below) r = next_u64();
  return static_cast<int>(r % un);
}

std::uint64_t Rng::fork_seed(std::uint64_t tag) const {
  return splitmix64(splitmix64(seed_) ^ splitmix64(tag ^ 0xA02C0157E8F0D3C5ULL));
}

int categorical_from_uniform(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    cum += probs[static_cast<std::size_t>(i)];
    if (u < cum) return i;
  }
  return n - 1;
}

}  // namespace apolab
