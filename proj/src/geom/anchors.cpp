#include "biopay/geom/anchors.hpp"

#include <cmath>

namespace biopay::geom {

std::vector<Anchor> generate_anchors(int grid_w, int grid_h, double stride,
                                     std::span<const double> scales,
                                     std::span<const double> ratios) {
  if (grid_w <= 0 || grid_h <= 0) throw GeometryError("generate_anchors: empty grid");
  if (!(stride > 0.0)) throw GeometryError("generate_anchors: stride must be positive");
  if (scales.empty()) throw GeometryError("generate_anchors: no scales");
  if (ratios.empty()) throw GeometryError("generate_anchors: no aspect ratios");
  for (double s : scales) {
    if (!(s > 0.0)) throw GeometryError("generate_anchors: scale must be positive");
  }
  for (double r : ratios) {
    if (!(r > 0.0)) throw GeometryError("generate_anchors: ratio must be positive");
  }

  // Shapes are shared by every cell.
  std::vector<std::pair<double, double>> shapes;
  shapes.reserve(scales.size() * ratios.size());
  for (double s : scales) {
    for (double r : ratios) {
      const double root = std::sqrt(r);
      shapes.emplace_back(s * root, s / root);
    }
  }

  std::vector<Anchor> anchors;
  anchors.reserve(static_cast<std::size_t>(grid_w) * grid_h * shapes.size());
  for (int row = 0; row < grid_h; ++row) {
    const double cy = (row + 0.5) * stride;
    for (int col = 0; col < grid_w; ++col) {
      const double cx = (col + 0.5) * stride;
      for (std::size_t k = 0; k < shapes.size(); ++k) {
        const auto [w, h] = shapes[k];
        anchors.push_back(Anchor{BoundingBox::from_center(cx, cy, w, h),
                                 static_cast<int>(k / ratios.size()),
                                 static_cast<int>(k % ratios.size()), row, col});
      }
    }
  }
  return anchors;
}

}  // namespace biopay::geom
