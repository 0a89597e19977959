#pragma once

#include <span>
#include <vector>

#include "biopay/geom/box.hpp"

namespace biopay::geom {

struct Anchor {
  BoundingBox box;
  int scale_index = 0;
  int ratio_index = 0;
  int row = 0;
  int col = 0;
};

struct AnchorConfig {
  double stride = 16.0;
  std::vector<double> scales{128.0, 256.0, 512.0};
  std::vector<double> ratios{0.5, 1.0, 2.0};
};

// Tiles |scales|·|ratios| anchors over every grid cell. Cell (row, col) is
// centred at ((col+½)·stride, (row+½)·stride); a ratio r, scale s anchor is
// s·√r wide and s/√r tall. Order: row, col, scale, ratio.
std::vector<Anchor> generate_anchors(int grid_w, int grid_h, double stride,
                                     std::span<const double> scales,
                                     std::span<const double> ratios);

inline std::vector<Anchor> generate_anchors(int grid_w, int grid_h, const AnchorConfig& cfg) {
  return generate_anchors(grid_w, grid_h, cfg.stride, cfg.scales, cfg.ratios);
}

}  // namespace biopay::geom
