#include "fastuplink/rng.hpp"

namespace fastuplink {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream RngStream::substream(std::string_view name) const {
  // FNV-1a over the name, then mixed with the parent seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(mix_seed(seed_ ^ mix_seed(h)));
}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(mix_seed(seed_ ^ mix_seed(index + 0x632be59bd9b4e019ULL)));
}

std::uint64_t RngStream::below(std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

}  // namespace fastuplink
