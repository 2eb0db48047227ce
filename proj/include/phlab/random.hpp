#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace phlab {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used only to turn a stream label into a key.
inline constexpr std::uint64_t label_key(std::string_view label)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of stream `index` under `label`, derived from the root seed alone.
/// Streams never depend on how work is split across threads.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view label, std::uint64_t index)
{
  return splitmix64(splitmix64(root ^ label_key(label)) + splitmix64(index));
}

class Stream {
public:
  Stream(std::uint64_t root, std::string_view label, std::uint64_t index)
      : gen_(stream_seed(root, label, index))
  {}

  /// Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::mt19937_64 gen_;
};

} // namespace phlab
