#ifndef MIG_RNG_HPP
#define MIG_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace mig {

/// A reproducible random substream.
///
/// All randomness in the library descends from one master seed. A stream is a
/// 64-bit key; `child(label, index)` derives an independent key, so the draws a
/// component makes never depend on how many draws its siblings made or on the
/// order in which parallel work was scheduled.
class Stream {
 public:
  constexpr Stream() = default;
  constexpr explicit Stream(std::uint64_t seed) : key_(seed) {}

  Stream child(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = mix(key_ + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ fnv1a(label));
    h = mix(h ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
    return Stream(h);
  }

  std::mt19937_64 engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
    return std::mt19937_64(seq);
  }

  constexpr std::uint64_t key() const { return key_; }
  friend constexpr bool operator==(Stream, Stream) = default;

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t key_ = 0;
};

}  // namespace mig

#endif  // MIG_RNG_HPP
