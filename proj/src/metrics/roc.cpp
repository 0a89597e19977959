#include "biopay/metrics/roc.hpp"

#include <algorithm>
#include <cstdint>

#include "biopay/metrics/classification.hpp"

namespace biopay::metrics {

RocCurve roc_auc(std::span<const ScoredLabel> samples) {
  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.is_positive ? 1 : 0;
  const std::size_t negatives = samples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricsError("roc_auc: need at least one positive and one negative sample");
  }

  std::vector<ScoredLabel> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  // Accumulate twice the area in integer units of 1/(P·N).
  std::uint64_t twice_area = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t group_tp = 0, group_fp = 0;
    const double score = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == score; ++i) {
      (sorted[i].is_positive ? group_tp : group_fp) += 1;
    }
    twice_area += static_cast<std::uint64_t>(group_fp) * (2 * tp + group_tp);
    tp += group_tp;
    fp += group_fp;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  curve.auc = static_cast<double>(twice_area) /
              (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return curve;
}

}  // namespace biopay::metrics
