#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fbmtest {

using Engine = std::mt19937_64;

/// Independent generator keyed by a base seed and a tuple of stream indices
/// (typically grid point and replication). Every distinct key tuple gets its
/// own seed_seq-expanded state, so replications can be computed in any
/// order or on any thread with identical results.
inline Engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * keys.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : keys) push(k);
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace fbmtest
