#include "gsvin/random.hpp"

#include <vector>

#include "gsvin/errors.hpp"

namespace gsvin {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw UsageError("uniform_below: empty range");
  const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
  std::uint64_t v = rng();
  while (v > limit) v = rng();
  return v % n;
}

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace gsvin
