// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

namespace imc {

/// Deterministic xoshiro256++ generator. The same seed always produces the
/// same stream, independent of platform and standard library, which is what
/// makes training runs bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal draw (Box-Muller, caches the spare value).
  double normal();
  double normal(double mean, double sigma);

  /// Independent stream keyed on (seed, salt). Does not advance this stream.
  Rng derive(std::uint64_t salt) const;

  std::uint64_t seed() const { return seed_; }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace imc
