#pragma once

#include <span>
#include <vector>

namespace biopay::metrics {

struct ScoredLabel {
  double score = 0.0;
  bool is_positive = false;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) … (1,1)
  double auc = 0.0;
};

// Threshold sweep over the distinct scores, high to low; tied scores move
// together, so the trapezoid area equals the Mann-Whitney statistic with
// ties counted as half. Throws unless both labels are present.
RocCurve roc_auc(std::span<const ScoredLabel> samples);

}  // namespace biopay::metrics
