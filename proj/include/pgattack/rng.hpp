#ifndef PGATTACK_RNG_HPP
#define PGATTACK_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

namespace pgattack {

// mt19937_64 behind a fixed sampling scheme.  std::uniform_*_distribution is
// not pinned across standard libraries, so we draw bits ourselves: the same
// seed gives the same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform double in [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0,n); modulo bias is ~n/2^64, irrelevant at our sizes
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  // inverse-CDF draw from a probability vector (assumed to sum to ~1);
  // any rounding slack lands on the last arm
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pgattack

#endif
