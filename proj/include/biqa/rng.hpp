// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace biqa {

// Seeded generator with distribution code of its own: the standard library
// distributions are implementation-defined, which would make crops, splits
// and synthetic data differ between toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal deviate (Marsaglia polar method).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Sub-seed for a named stream and index, independent of evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::string_view key);

}  // namespace biqa
