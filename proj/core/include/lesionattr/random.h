#ifndef LESIONATTR_RANDOM_H_
#define LESIONATTR_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lesionattr {

// Counter-based generator built on the SplitMix64 finalizer. The output
// sequence depends only on (key, counter), so streams are reproducible across
// platforms and can be split without coordination.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  // Independent child stream; the parent is not advanced.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  // Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t z);

 private:
  Rng(std::uint64_t key, std::uint64_t counter, bool) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lesionattr

#endif  // LESIONATTR_RANDOM_H_
