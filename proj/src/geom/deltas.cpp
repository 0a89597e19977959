#include "biopay/geom/deltas.hpp"

#include <algorithm>
#include <cmath>

namespace biopay::geom {
namespace {

void require_positive_extent(const BoundingBox& b, const char* what) {
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) {
    throw GeometryError(std::string(what) + " must have positive width and height");
  }
}

}  // namespace

BoxDelta encode_deltas(const BoundingBox& anchor, const BoundingBox& target) {
  require_positive_extent(anchor, "encode_deltas: anchor");
  require_positive_extent(target, "encode_deltas: target");
  const double aw = anchor.width();
  const double ah = anchor.height();
  return {(target.center_x() - anchor.center_x()) / aw,
          (target.center_y() - anchor.center_y()) / ah, std::log(target.width() / aw),
          std::log(target.height() / ah)};
}

BoundingBox decode_deltas(const BoundingBox& anchor, const BoxDelta& delta) {
  require_positive_extent(anchor, "decode_deltas: anchor");
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.center_x() + delta.d_center_x * aw;
  const double cy = anchor.center_y() + delta.d_center_y * ah;
  return BoundingBox::from_center(cx, cy, aw * std::exp(delta.d_width),
                                  ah * std::exp(delta.d_height));
}

BoundingBox clip_to_image(const BoundingBox& box, double width, double height) {
  return {std::clamp(box.x_min, 0.0, width), std::clamp(box.y_min, 0.0, height),
          std::clamp(box.x_max, 0.0, width), std::clamp(box.y_max, 0.0, height)};
}

}  // namespace biopay::geom
