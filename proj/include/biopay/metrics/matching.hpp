#pragma once

#include <span>
#include <vector>

#include "biopay/geom/box.hpp"

namespace biopay::metrics {

using geom::BoundingBox;
using geom::Detection;
using geom::GroundTruth;

enum class MatchOutcome { TruePositive, FalsePositive, Ignored };

struct MatchResult {
  std::vector<MatchOutcome> outcome;  // per detection, input order
  std::vector<int> matched_gt;        // per detection, -1 when unmatched
  std::vector<bool> gt_matched;       // per ground truth
};

// Greedy matching in detection_order. Each detection takes the unmatched
// same-class gt with the highest IoU >= threshold (lowest index on ties).
// Gts flagged in `gt_ignore` are only considered after the regular ones; a
// detection that lands on one is reported as Ignored rather than TP.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_threshold, std::span<const bool> gt_ignore = {});

}  // namespace biopay::metrics
