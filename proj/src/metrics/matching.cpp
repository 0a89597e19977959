#include "biopay/metrics/matching.hpp"

#include "biopay/geom/nms.hpp"

namespace biopay::metrics {

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_threshold, std::span<const bool> gt_ignore) {
  if (!gt_ignore.empty() && gt_ignore.size() != gts.size()) {
    throw geom::GeometryError("match_detections: ignore mask size mismatch");
  }
  auto ignored = [&](std::size_t g) { return !gt_ignore.empty() && gt_ignore[g]; };

  MatchResult result{std::vector<MatchOutcome>(dets.size(), MatchOutcome::FalsePositive),
                     std::vector<int>(dets.size(), -1), std::vector<bool>(gts.size(), false)};

  for (std::size_t d : geom::detection_order(dets)) {
    const Detection& det = dets[d];
    int best = -1;
    double best_iou = iou_threshold;
    bool best_is_ignored = true;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (result.gt_matched[g] || gts[g].class_id != det.class_id) continue;
      const double overlap = geom::iou(det.box, gts[g].box);
      if (overlap < iou_threshold) continue;
      const bool ign = ignored(g);
      // A regular gt always beats an ignored one.
      if (best >= 0 && !best_is_ignored && ign) continue;
      if (best < 0 || (best_is_ignored && !ign) || overlap > best_iou) {
        best = static_cast<int>(g);
        best_iou = overlap;
        best_is_ignored = ign;
      }
    }
    if (best < 0) continue;
    result.gt_matched[static_cast<std::size_t>(best)] = true;
    result.matched_gt[d] = best;
    result.outcome[d] = best_is_ignored ? MatchOutcome::Ignored : MatchOutcome::TruePositive;
  }
  return result;
}

}  // namespace biopay::metrics
