#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xview {

// splitmix64, used for seeding and stream derivation.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** with explicit named substreams. All experiment randomness
// goes through this class; std:: distributions are implementation-defined
// and would break cross-platform reproducibility of stored artifacts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1).
  double uniform();

  // Uniform integer in [0, n). Rejection-free unbiased enough for our use
  // (n is always far below 2^32).
  std::size_t uniform_index(std::size_t n);

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller.
  double normal();

  // Derive an independent substream. Streams with distinct ids (or names)
  // are statistically independent and depend only on the root seed.
  Rng stream(std::uint64_t id) const;
  Rng stream(const std::string& name) const;

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xview
