#include "biopay/geom/box.hpp"

#include <algorithm>

#include "biopay/simd/kernels.hpp"

namespace biopay::geom {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoxBatch::BoxBatch(std::span<const BoundingBox> boxes) {
  x_min_.reserve(boxes.size());
  y_min_.reserve(boxes.size());
  x_max_.reserve(boxes.size());
  y_max_.reserve(boxes.size());
  for (const auto& b : boxes) push_back(b);
}

void BoxBatch::push_back(const BoundingBox& box) {
  x_min_.push_back(box.x_min);
  y_min_.push_back(box.y_min);
  x_max_.push_back(box.x_max);
  y_max_.push_back(box.y_max);
}

void BoxBatch::iou_against(const BoundingBox& box, std::span<double> out) const {
  if (out.size() != size()) throw GeometryError("iou_against: output size mismatch");
  const simd::BoxColumns cols{x_min_, y_min_, x_max_, y_max_};
  simd::active_kernels().iou_one_to_many(box.x_min, box.y_min, box.x_max, box.y_max, cols,
                                         out);
}

std::vector<double> iou_matrix(std::span<const BoundingBox> rows,
                               std::span<const BoundingBox> cols) {
  std::vector<double> out(rows.size() * cols.size());
  if (cols.empty()) return out;
  const BoxBatch batch(cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    batch.iou_against(rows[r], std::span<double>(out).subspan(r * cols.size(), cols.size()));
  }
  return out;
}

}  // namespace biopay::geom
