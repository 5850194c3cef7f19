#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace genattr {

// Stream domains keep the draws of different estimator phases disjoint.
enum class StreamDomain : std::uint64_t {
  permutation = 1,
  banzhaf = 2,
  refine = 3,
  logprob = 4,
  synthetic = 5,
};

/// Counter-based generator: the n-th output is a pure function of
/// (seed, domain, stream, n). Path t of a run always sees the same draws no
/// matter which worker executes it.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, StreamDomain domain, std::uint64_t stream,
            std::uint64_t sub_stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Fisher-Yates; independent of the standard library's shuffle algorithm.
template <class T>
void shuffle(std::span<T> items, StreamRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace genattr
