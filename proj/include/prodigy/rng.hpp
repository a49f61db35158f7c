#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace prodigy {

/// Deterministic generator keyed by a tuple of integers, e.g.
/// (master seed, client id, round, purpose). Equal keys give equal streams,
/// independent of call order or thread.
inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * key.size());
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace prodigy
