#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "biopay/metrics/matching.hpp"

namespace biopay::metrics {

// One evaluated image: detector output and its annotations.
struct ImageEval {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

enum class Interpolation { AllPoints, ElevenPoint };

// Half-open area interval [min, max) in square pixels.
struct AreaRange {
  double min = 0.0;
  double max = 1e10;

  bool contains(double area) const { return area >= min && area < max; }
};

namespace area {
inline constexpr AreaRange kAll{0.0, 1e10};
inline constexpr AreaRange kSmall{0.0, 32.0 * 32.0};
inline constexpr AreaRange kMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kLarge{96.0 * 96.0, 1e10};
}  // namespace area

struct ApOptions {
  Interpolation interpolation = Interpolation::AllPoints;
  std::optional<AreaRange> area;
};

// AP of a ranking given as TP flags in rank order over `num_gt` objects.
// AllPoints uses the monotone precision envelope at every recall step.
// Returns 0 when num_gt is 0.
double average_precision_ranked(const std::vector<bool>& ranked_is_tp, std::size_t num_gt,
                                Interpolation interpolation = Interpolation::AllPoints);

struct ClassRanking {
  std::vector<bool> ranked_is_tp;
  std::size_t num_gt = 0;
};

// Matches one class image-by-image and merges the detections into a single
// score-ranked list (ties keep image order, then detection order). With an
// area range, gts outside it are ignored, as are unmatched detections whose
// own area falls outside.
ClassRanking rank_class(std::span<const ImageEval> images, int class_id, double iou_threshold,
                        const std::optional<AreaRange>& area = std::nullopt);

double average_precision(std::span<const ImageEval> images, int class_id, double iou_threshold,
                         const ApOptions& options = {});

// 0.50, 0.55, …, 0.95.
std::vector<double> coco_iou_thresholds();

// Mean of AP over (class, threshold). Classes with neither gts nor
// detections in range are left out; returns 0 if nothing is left.
double mean_ap(std::span<const ImageEval> images, std::span<const int> class_ids,
               std::span<const double> iou_thresholds, const ApOptions& options = {});

struct MapSuite {
  double map = 0.0;  // [.50:.95]
  double map_50 = 0.0;
  double map_75 = 0.0;
  double map_small = 0.0;
  double map_medium = 0.0;
  double map_large = 0.0;
};

MapSuite map_suite(std::span<const ImageEval> images, std::span<const int> class_ids,
                   Interpolation interpolation = Interpolation::AllPoints);

// Recall with each image truncated to its top-k detections, averaged over
// thresholds and over classes that have at least one gt in range.
double average_recall_at_k(std::span<const ImageEval> images, std::span<const int> class_ids,
                           std::size_t k, std::span<const double> iou_thresholds,
                           const std::optional<AreaRange>& area = std::nullopt);

struct RecallSuite {
  double ar_1 = 0.0;
  double ar_10 = 0.0;
  double ar_100 = 0.0;
  double ar_100_small = 0.0;
  double ar_100_medium = 0.0;
  double ar_100_large = 0.0;
};

RecallSuite recall_suite(std::span<const ImageEval> images, std::span<const int> class_ids);

}  // namespace biopay::metrics
