#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biopay/geom/anchors.hpp"
#include "biopay/geom/box.hpp"

namespace biopay::geom {

struct AssignmentLabel {
  enum class Kind { Foreground, Background, Ignore };

  Kind kind = Kind::Ignore;
  int gt_index = -1;  // Foreground only
  int class_id = -1;  // Foreground proposals only

  static AssignmentLabel foreground(int gt, int cls = -1) { return {Kind::Foreground, gt, cls}; }
  static AssignmentLabel background() { return {Kind::Background, -1, -1}; }
  static AssignmentLabel ignore() { return {Kind::Ignore, -1, -1}; }

  bool is_foreground() const { return kind == Kind::Foreground; }
  bool is_background() const { return kind == Kind::Background; }
  bool is_ignore() const { return kind == Kind::Ignore; }

  friend bool operator==(const AssignmentLabel&, const AssignmentLabel&) = default;
};

struct RpnThresholds {
  double foreground = 0.7;
  double background = 0.3;
};

// Anchor labelling for the proposal network. max IoU >= foreground gives
// Foreground(argmax gt), < background gives Background, anything between is
// Ignore. Afterwards every gt's best anchor (lowest index on ties) is forced
// to Foreground(gt) unless it is already foreground.
std::vector<AssignmentLabel> assign_rpn_labels(std::span<const BoundingBox> anchors,
                                               std::span<const BoundingBox> gts,
                                               RpnThresholds thresholds = {});

std::vector<AssignmentLabel> assign_rpn_labels(std::span<const Anchor> anchors,
                                               std::span<const BoundingBox> gts,
                                               RpnThresholds thresholds = {});

inline constexpr std::size_t kRpnBatchSize = 256;
inline constexpr double kRpnForegroundFraction = 0.5;

// Draws at most floor(fg_fraction·batch) foreground indices, fills the rest
// with background. Ignore entries are never chosen. Both groups come back in
// ascending index order, foreground first.
std::vector<std::size_t> sample_minibatch(std::span<const AssignmentLabel> labels,
                                          std::size_t batch = kRpnBatchSize,
                                          double fg_fraction = kRpnForegroundFraction,
                                          std::uint64_t rng_seed = 0);

struct ProposalThresholds {
  double foreground = 0.5;
  double background_floor = 0.1;
};

// Second-stage targets: max IoU >= foreground is Foreground with that gt's
// class, [background_floor, foreground) is Background, below is Ignore.
std::vector<AssignmentLabel> assign_proposal_labels(std::span<const BoundingBox> proposals,
                                                    std::span<const GroundTruth> gts,
                                                    ProposalThresholds thresholds = {});

}  // namespace biopay::geom
