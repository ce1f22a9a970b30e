#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fairspread {

using Rng = std::mt19937_64;

/// Builds an independent generator for a (base seed, stream indices...) tuple.
/// Streams with different index tuples are decorrelated through seed_seq mixing.
inline Rng derive_rng(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::seed_seq::result_type words[16];
  std::size_t count = 0;
  words[count++] = static_cast<std::uint32_t>(base);
  words[count++] = static_cast<std::uint32_t>(base >> 32);
  for (std::uint64_t s : stream) {
    if (count + 2 > 16) break;
    words[count++] = static_cast<std::uint32_t>(s);
    words[count++] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(words, words + count);
  return Rng(seq);
}

}  // namespace fairspread
