#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace bsnas {

/// Counter-based random stream.
///
/// Output i (i = 1, 2, ...) of a stream with key K is splitmix64(K + i * 0x9E3779B97F4A7C15),
/// where splitmix64 is the standard SplitMix64 finalizer. The whole state is
/// therefore the pair (key, counter), which is what checkpoints persist.
///
/// Named sub-streams: `Rng::stream(seed, label)` uses
/// key = splitmix64(seed ^ fnv1a64(label)); `split(i)` derives an indexed
/// child with key = splitmix64(key ^ splitmix64(i + 1)). Neither consumes draws
/// from the parent.
///
/// Bounded integers use rejection on the low 64 bits (threshold = 2^64 mod n),
/// doubles take the top 53 bits, normals use Box-Muller with two fresh draws
/// per variate (no cached spare). These rules are the contract a port in
/// another language has to follow to replay streams.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng() = default;
  explicit Rng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static Rng stream(std::uint64_t seed, std::string_view label);
  [[nodiscard]] Rng split(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

  std::uint64_t next();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform double in [0, 1).
  double uniform();
  double normal(double mean = 0.0, double sd = 1.0);
  bool coin() { return (next() >> 63) != 0; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace bsnas
