#include "biopay/geom/assign.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace biopay::geom {
namespace {

struct BestMatch {
  double iou = 0.0;
  int index = -1;
};

// Per-row maximum over the columns, lowest column on ties.
std::vector<BestMatch> row_best(std::span<const BoundingBox> rows,
                                std::span<const BoundingBox> cols) {
  std::vector<BestMatch> best(rows.size());
  if (cols.empty()) return best;
  const BoxBatch batch(cols);
  std::vector<double> overlaps(cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    batch.iou_against(rows[r], overlaps);
    BestMatch m{overlaps[0], 0};
    for (std::size_t c = 1; c < cols.size(); ++c) {
      if (overlaps[c] > m.iou) m = {overlaps[c], static_cast<int>(c)};
    }
    best[r] = m;
  }
  return best;
}

}  // namespace

std::vector<AssignmentLabel> assign_rpn_labels(std::span<const BoundingBox> anchors,
                                               std::span<const BoundingBox> gts,
                                               RpnThresholds thresholds) {
  if (!(thresholds.foreground > thresholds.background)) {
    throw GeometryError("assign_rpn_labels: foreground threshold must exceed background");
  }
  std::vector<AssignmentLabel> labels(anchors.size(), AssignmentLabel::background());
  if (gts.empty()) return labels;

  const auto best = row_best(anchors, gts);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (best[a].iou >= thresholds.foreground) {
      labels[a] = AssignmentLabel::foreground(best[a].index);
    } else if (best[a].iou < thresholds.background) {
      labels[a] = AssignmentLabel::background();
    } else {
      labels[a] = AssignmentLabel::ignore();
    }
  }

  if (anchors.empty()) return labels;
  const auto best_anchor = row_best(gts, anchors);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    auto& label = labels[static_cast<std::size_t>(best_anchor[g].index)];
    if (!label.is_foreground()) label = AssignmentLabel::foreground(static_cast<int>(g));
  }
  return labels;
}

std::vector<AssignmentLabel> assign_rpn_labels(std::span<const Anchor> anchors,
                                               std::span<const BoundingBox> gts,
                                               RpnThresholds thresholds) {
  std::vector<BoundingBox> boxes;
  boxes.reserve(anchors.size());
  for (const auto& a : anchors) boxes.push_back(a.box);
  return assign_rpn_labels(boxes, gts, thresholds);
}

std::vector<std::size_t> sample_minibatch(std::span<const AssignmentLabel> labels,
                                          std::size_t batch, double fg_fraction,
                                          std::uint64_t rng_seed) {
  if (batch == 0) throw GeometryError("sample_minibatch: batch must be positive");
  if (!(fg_fraction > 0.0 && fg_fraction < 1.0)) {
    throw GeometryError("sample_minibatch: fg_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].is_foreground()) fg.push_back(i);
    else if (labels[i].is_background()) bg.push_back(i);
  }

  std::mt19937_64 rng(rng_seed);
  auto draw = [&rng](std::vector<std::size_t>& pool, std::size_t k) {
    // Partial Fisher-Yates; the first k slots form the sample.
    k = std::min(k, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
  };

  const auto fg_cap = static_cast<std::size_t>(std::floor(fg_fraction * static_cast<double>(batch)));
  draw(fg, fg_cap);
  draw(bg, batch - fg.size());

  std::vector<std::size_t> out = std::move(fg);
  out.insert(out.end(), bg.begin(), bg.end());
  return out;
}

std::vector<AssignmentLabel> assign_proposal_labels(std::span<const BoundingBox> proposals,
                                                    std::span<const GroundTruth> gts,
                                                    ProposalThresholds thresholds) {
  std::vector<BoundingBox> gt_boxes;
  gt_boxes.reserve(gts.size());
  for (const auto& g : gts) gt_boxes.push_back(g.box);

  const auto best = row_best(proposals, gt_boxes);
  std::vector<AssignmentLabel> labels(proposals.size());
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    const auto& m = best[p];
    if (m.index >= 0 && m.iou >= thresholds.foreground) {
      labels[p] = AssignmentLabel::foreground(m.index, gts[static_cast<std::size_t>(m.index)].class_id);
    } else if (m.iou >= thresholds.background_floor) {
      labels[p] = AssignmentLabel::background();
    } else {
      labels[p] = AssignmentLabel::ignore();
    }
  }
  return labels;
}

}  // namespace biopay::geom
