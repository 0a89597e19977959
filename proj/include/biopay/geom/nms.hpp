#pragma once

#include <span>
#include <vector>

#include "biopay/geom/box.hpp"

namespace biopay::geom {

inline constexpr double kDefaultNmsThreshold = 0.6;

// Orders detections by score descending, then class ascending, then input
// position. Returns indices into `dets`.
std::vector<std::size_t> detection_order(std::span<const Detection> dets);

// Greedy per-class suppression. A detection is dropped when its IoU with an
// already kept detection of the same class strictly exceeds the threshold.
// Survivors come back in detection_order.
std::vector<Detection> nms(std::span<const Detection> dets,
                           double iou_threshold = kDefaultNmsThreshold);

}  // namespace biopay::geom
