#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace survbench {

// Stable 64-bit hash of a string (FNV-1a), used to key seed streams by name.
std::uint64_t hash_name(std::string_view name);

// Derives an independent stream seed from a base seed and a key path.
// Counter-based: derive_seed(s, {a, b}) never depends on other keys, so adding
// a learner or a tree leaves every other stream untouched.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                       // [0, 1)
  std::size_t index(std::size_t n);       // uniform in [0, n)
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from `pool`, in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace survbench
