#include "gsvin/heuristic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsvin/errors.hpp"

namespace gsvin {
namespace {

void check(int height, int width, int f) {
  if (height < 1 || width < 1) throw ValidationError("map dimensions must be positive");
  if (f < 3) throw ValidationError("kernel size " + std::to_string(f) + " has zero propagation radius; need f >= 3");
  if (f % 2 == 0) throw ValidationError("kernel size must be odd, got " + std::to_string(f));
}

}  // namespace

int heuristic_k(int height, int width, int f) { return scaled_k(height, width, f, 1.0); }

int scaled_k(int height, int width, int f, double k_prime) {
  check(height, width, f);
  if (!(k_prime > 0.0)) throw ValidationError("k' must be positive");
  const double diagonal = std::hypot(static_cast<double>(height), static_cast<double>(width));
  const double radius = static_cast<double>((f - 1) / 2);
  return std::max(1, static_cast<int>(std::ceil(k_prime * diagonal / radius)));
}

}  // namespace gsvin
