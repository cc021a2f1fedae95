#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace permsig {

/// Identifies which operation consumes a random stream. Two operations keyed
/// by the same (seed, replicate) never share draws because their tags differ.
enum class StreamTag : std::uint64_t {
  Permute = 1,
  Folds,
  SplitGroups,
  TrimRows,
  ShuffleRows,
  Synth,
  AeInit,
  AeSplit,
  AeEpoch,
};

/// Counter-based generator: output i is a bijective mix of (key + i * gamma).
/// No hidden state beyond the counter, so any stream can be reproduced from
/// its key alone regardless of thread scheduling.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Hash-combine two words into a new 64-bit key.
std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b);

/// The pair (master_seed, replicate_index) that determines every random
/// choice made inside one replicate.
struct PermutationPlan {
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_index = 0;

  Stream stream(StreamTag tag) const;

  /// A plan for a nested operation (one CV fold, one region block...).
  /// The replicate index is kept so provenance stays readable.
  PermutationPlan child(std::uint64_t salt) const {
    return {combine_seed(master_seed, salt), replicate_index};
  }

  friend bool operator==(const PermutationPlan&, const PermutationPlan&) = default;
};

/// 0..n-1 in a uniformly random order.
std::vector<std::size_t> random_permutation(std::size_t n, Stream& stream);

}  // namespace permsig
