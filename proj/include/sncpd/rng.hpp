#pragma once

#include <cstdint>
#include <random>

namespace sncpd {

using Rng = std::mt19937_64;

// Named substreams derived from one master seed. Keeping the streams apart
// means e.g. adding a dropout layer does not shift the data shuffling.
enum class Stream : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Crop = 3,
  Dropout = 4,
  Data = 5,
  Certify = 6,
  Experiment = 7,
  Bandwidth = 8,
};

// splitmix64; decorrelates sequential master seeds and stream ids.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t salt = 0) {
  return mix64(mix64(master) ^ mix64(static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ull + salt));
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t salt = 0) {
  return Rng(derive_seed(master, stream, salt));
}

}  // namespace sncpd
