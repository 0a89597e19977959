#pragma once

#include "biopay/geom/box.hpp"

namespace biopay::geom {

// Log-space centre/size regression offsets of a box relative to an anchor.
struct BoxDelta {
  double d_center_x = 0.0;
  double d_center_y = 0.0;
  double d_width = 0.0;
  double d_height = 0.0;

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

BoxDelta encode_deltas(const BoundingBox& anchor, const BoundingBox& target);
BoundingBox decode_deltas(const BoundingBox& anchor, const BoxDelta& delta);

// Clamps a box into [0, width] x [0, height].
BoundingBox clip_to_image(const BoundingBox& box, double width, double height);

}  // namespace biopay::geom
