#pragma once

#include <array>

namespace gsvin {

/// Iterations needed for value to cross an m x n map when each iteration spreads (f-1)/2 cells:
///   k = ceil( sqrt(m^2 + n^2) / ((f - 1) / 2) ).
/// Throws ValidationError for f < 3, even f, or non-positive sizes.
int heuristic_k(int height, int width, int f);

/// k' multiple of the heuristic, at least 1: k = max(1, ceil(k' * sqrt(m^2 + n^2) / ((f - 1) / 2))).
int scaled_k(int height, int width, int f, double k_prime);

/// Reference iteration counts for 32x32 maps, rows = kTable4KPrimes, columns = kTable4Kernels.
inline constexpr std::array<int, 7> kTable4Kernels = {3, 5, 7, 9, 11, 13, 15};
inline constexpr std::array<double, 6> kTable4KPrimes = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
inline constexpr std::array<std::array<int, 7>, 6> kTable4 = {{
    {23, 12, 8, 6, 5, 4, 4},
    {34, 17, 12, 9, 7, 6, 5},
    {46, 23, 16, 12, 10, 8, 7},
    {57, 29, 19, 15, 12, 10, 9},
    {68, 34, 23, 17, 14, 12, 10},
    {91, 46, 31, 23, 19, 16, 13},
}};

}  // namespace gsvin
