#pragma once

#include <compare>

namespace gsvin {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

}  // namespace gsvin
