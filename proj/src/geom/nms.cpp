#include "biopay/geom/nms.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace biopay::geom {

std::vector<std::size_t> detection_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].class_id < dets[b].class_id;
  });
  return order;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw GeometryError("nms: threshold must lie in [0, 1]");
  }
  const auto order = detection_order(dets);

  // Ranks within each class, already in suppression order.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    by_class[dets[order[rank]].class_id].push_back(rank);
  }

  std::vector<bool> kept(order.size(), false);
  std::vector<double> overlaps;
  for (const auto& [cls, ranks] : by_class) {
    BoxBatch batch;
    for (std::size_t r : ranks) batch.push_back(dets[order[r]].box);
    std::vector<bool> suppressed(ranks.size(), false);
    overlaps.resize(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (suppressed[i]) continue;
      kept[ranks[i]] = true;
      batch.iou_against(batch[i], overlaps);
      for (std::size_t j = i + 1; j < ranks.size(); ++j) {
        if (overlaps[j] > iou_threshold) suppressed[j] = true;
      }
    }
  }

  std::vector<Detection> out;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (kept[rank]) out.push_back(dets[order[rank]]);
  }
  return out;
}

}  // namespace biopay::geom
