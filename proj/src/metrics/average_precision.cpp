#include "biopay/metrics/average_precision.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "biopay/geom/nms.hpp"
#include "biopay/metrics/classification.hpp"

namespace biopay::metrics {

double average_precision_ranked(const std::vector<bool>& ranked_is_tp, std::size_t num_gt,
                                Interpolation interpolation) {
  if (num_gt == 0) return 0.0;
  const std::size_t n = ranked_is_tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_is_tp[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }

  if (interpolation == Interpolation::ElevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double level = i / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (recall[k] >= level) best = std::max(best, precision[k]);
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // Envelope from the right, then one term per recall increment.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_is_tp[k]) sum += precision[k];
  }
  return sum / static_cast<double>(num_gt);
}

ClassRanking rank_class(std::span<const ImageEval> images, int class_id, double iou_threshold,
                        const std::optional<AreaRange>& area) {
  struct Entry {
    double score;
    bool tp;
  };
  std::vector<Entry> entries;
  ClassRanking out;

  for (const auto& image : images) {
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    for (const auto& d : image.dets) {
      if (d.class_id == class_id) dets.push_back(d);
    }
    for (const auto& g : image.gts) {
      if (g.class_id == class_id) gts.push_back(g);
    }
    // std::vector<bool> has no contiguous storage to view.
    const auto ignore = std::make_unique<bool[]>(gts.size() + 1);
    bool any_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      ignore[g] = area && !area->contains(gts[g].box.area());
      any_ignored = any_ignored || ignore[g];
      if (!ignore[g]) ++out.num_gt;
    }
    const auto match = match_detections(
        dets, gts, iou_threshold,
        any_ignored ? std::span<const bool>(ignore.get(), gts.size()) : std::span<const bool>());

    for (std::size_t d : geom::detection_order(dets)) {
      if (match.outcome[d] == MatchOutcome::Ignored) continue;
      if (match.outcome[d] == MatchOutcome::FalsePositive && area &&
          !area->contains(dets[d].box.area())) {
        continue;
      }
      entries.push_back({dets[d].score, match.outcome[d] == MatchOutcome::TruePositive});
    }
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });
  out.ranked_is_tp.reserve(entries.size());
  for (const auto& e : entries) out.ranked_is_tp.push_back(e.tp);
  return out;
}

double average_precision(std::span<const ImageEval> images, int class_id, double iou_threshold,
                         const ApOptions& options) {
  const auto ranking = rank_class(images, class_id, iou_threshold, options.area);
  return average_precision_ranked(ranking.ranked_is_tp, ranking.num_gt, options.interpolation);
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

double mean_ap(std::span<const ImageEval> images, std::span<const int> class_ids,
               std::span<const double> iou_thresholds, const ApOptions& options) {
  if (class_ids.empty()) throw MetricsError("mean_ap: no classes");
  if (iou_thresholds.empty()) throw MetricsError("mean_ap: no IoU thresholds");
  double sum = 0.0;
  std::size_t terms = 0;
  for (int cls : class_ids) {
    for (double thr : iou_thresholds) {
      const auto ranking = rank_class(images, cls, thr, options.area);
      if (ranking.num_gt == 0 && ranking.ranked_is_tp.empty()) continue;
      sum += average_precision_ranked(ranking.ranked_is_tp, ranking.num_gt, options.interpolation);
      ++terms;
    }
  }
  return terms == 0 ? 0.0 : sum / static_cast<double>(terms);
}

MapSuite map_suite(std::span<const ImageEval> images, std::span<const int> class_ids,
                   Interpolation interpolation) {
  const auto coco = coco_iou_thresholds();
  const double t50[] = {0.5};
  const double t75[] = {0.75};
  MapSuite s;
  s.map = mean_ap(images, class_ids, coco, {interpolation, std::nullopt});
  s.map_50 = mean_ap(images, class_ids, t50, {interpolation, std::nullopt});
  s.map_75 = mean_ap(images, class_ids, t75, {interpolation, std::nullopt});
  s.map_small = mean_ap(images, class_ids, coco, {interpolation, area::kSmall});
  s.map_medium = mean_ap(images, class_ids, coco, {interpolation, area::kMedium});
  s.map_large = mean_ap(images, class_ids, coco, {interpolation, area::kLarge});
  return s;
}

double average_recall_at_k(std::span<const ImageEval> images, std::span<const int> class_ids,
                           std::size_t k, std::span<const double> iou_thresholds,
                           const std::optional<AreaRange>& area) {
  if (k == 0) throw MetricsError("average_recall_at_k: k must be positive");
  if (iou_thresholds.empty()) throw MetricsError("average_recall_at_k: no thresholds");

  std::vector<ImageEval> truncated;
  truncated.reserve(images.size());
  for (const auto& image : images) {
    ImageEval t;
    const auto order = geom::detection_order(image.dets);
    for (std::size_t r = 0; r < order.size() && r < k; ++r) t.dets.push_back(image.dets[order[r]]);
    t.gts = image.gts;
    truncated.push_back(std::move(t));
  }

  double sum = 0.0;
  std::size_t classes = 0;
  for (int cls : class_ids) {
    double class_sum = 0.0;
    std::size_t num_gt = 0;
    for (double thr : iou_thresholds) {
      const auto ranking = rank_class(truncated, cls, thr, area);
      num_gt = ranking.num_gt;
      if (num_gt == 0) break;
      const auto tp = std::count(ranking.ranked_is_tp.begin(), ranking.ranked_is_tp.end(), true);
      class_sum += static_cast<double>(tp) / static_cast<double>(num_gt);
    }
    if (num_gt == 0) continue;
    sum += class_sum / static_cast<double>(iou_thresholds.size());
    ++classes;
  }
  return classes == 0 ? 0.0 : sum / static_cast<double>(classes);
}

RecallSuite recall_suite(std::span<const ImageEval> images, std::span<const int> class_ids) {
  const auto coco = coco_iou_thresholds();
  RecallSuite s;
  s.ar_1 = average_recall_at_k(images, class_ids, 1, coco);
  s.ar_10 = average_recall_at_k(images, class_ids, 10, coco);
  s.ar_100 = average_recall_at_k(images, class_ids, 100, coco);
  s.ar_100_small = average_recall_at_k(images, class_ids, 100, coco, area::kSmall);
  s.ar_100_medium = average_recall_at_k(images, class_ids, 100, coco, area::kMedium);
  s.ar_100_large = average_recall_at_k(images, class_ids, 100, coco, area::kLarge);
  return s;
}

}  // namespace biopay::metrics
