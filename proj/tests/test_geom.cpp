#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "biopay/geom/anchors.hpp"
#include "biopay/geom/assign.hpp"
#include "biopay/geom/box.hpp"
#include "biopay/geom/deltas.hpp"
#include "biopay/geom/nms.hpp"
#include "oracles.hpp"

using namespace biopay::geom;

TEST(Iou, IdenticalBoxesGiveOne) {
  const BoundingBox a{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0);
}

TEST(Iou, HalfOverlapIsOneSeventh) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0);
}

TEST(Iou, ZeroAreaUnionGivesZero) {
  const BoundingBox p{3, 3, 3, 3};
  EXPECT_EQ(iou(p, p), 0.0);
}

TEST(Iou, SymmetricBoundedAndMatchesOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 100);
  for (int i = 0; i < 2000; ++i) {
    const auto a = BoundingBox::from_center(u(rng), u(rng), u(rng) + 0.1, u(rng) + 0.1);
    const auto b = BoundingBox::from_center(u(rng), u(rng), u(rng) + 0.1, u(rng) + 0.1);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, oracle::overlap(a, b), 1e-15);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
}

TEST(Iou, MatrixMatchesPairwise) {
  std::mt19937_64 rng(3);
  std::vector<BoundingBox> rows, cols;
  for (int i = 0; i < 7; ++i) rows.push_back(oracle::grid_box(rng));
  for (int i = 0; i < 13; ++i) cols.push_back(oracle::grid_box(rng));
  const auto m = iou_matrix(rows, cols);
  ASSERT_EQ(m.size(), rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) EXPECT_EQ(m[r * cols.size() + c], iou(rows[r], cols[c]));
  }
}

TEST(Anchors, CountFor64x64Grid) {
  const auto anchors = generate_anchors(64, 64, AnchorConfig{});
  EXPECT_EQ(anchors.size(), 36864u);
}

TEST(Anchors, SingleCellSingleShape) {
  const std::vector<double> scales{16}, ratios{1};
  const auto a = generate_anchors(1, 1, 16, scales, ratios);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a[0].box.center_x(), 8.0);
  EXPECT_DOUBLE_EQ(a[0].box.center_y(), 8.0);
  EXPECT_DOUBLE_EQ(a[0].box.width(), 16.0);
  EXPECT_DOUBLE_EQ(a[0].box.height(), 16.0);
}

TEST(Anchors, ShapesAndSharedCentres) {
  const AnchorConfig cfg;
  const auto anchors = generate_anchors(5, 4, cfg);
  ASSERT_EQ(anchors.size(), 5u * 4u * 9u);
  for (std::size_t i = 0; i < anchors.size(); i += 9) {
    for (std::size_t k = 0; k < 9; ++k) {
      const auto& a = anchors[i + k];
      EXPECT_EQ(a.row, anchors[i].row);
      EXPECT_EQ(a.col, anchors[i].col);
      EXPECT_NEAR(a.box.center_x(), (a.col + 0.5) * 16, 1e-9);
      EXPECT_NEAR(a.box.center_y(), (a.row + 0.5) * 16, 1e-9);
      const double s = cfg.scales[static_cast<std::size_t>(a.scale_index)];
      const double r = cfg.ratios[static_cast<std::size_t>(a.ratio_index)];
      EXPECT_NEAR(a.box.width(), s * std::sqrt(r), 1e-9);
      EXPECT_NEAR(a.box.height(), s / std::sqrt(r), 1e-9);
    }
  }
}

TEST(Anchors, RejectsBadInput) {
  const std::vector<double> none, one{1.0};
  EXPECT_THROW(generate_anchors(1, 1, 16, none, one), GeometryError);
  EXPECT_THROW(generate_anchors(1, 1, 16, one, none), GeometryError);
  EXPECT_THROW(generate_anchors(0, 4, 16, one, one), GeometryError);
  EXPECT_THROW(generate_anchors(4, 0, 16, one, one), GeometryError);
  EXPECT_THROW(generate_anchors(4, 4, 0, one, one), GeometryError);
}

TEST(Nms, SingleDetectionSurvives) {
  const std::vector<Detection> d{{{0, 0, 5, 5}, 1, 0.4}};
  EXPECT_EQ(nms(d, 0.5), d);
}

TEST(Nms, IdenticalBoxesKeepHigherScore) {
  const std::vector<Detection> d{{{0, 0, 5, 5}, 0, 0.8}, {{0, 0, 5, 5}, 0, 0.9}};
  const auto out = nms(d, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(Nms, DifferentClassesNeverSuppress) {
  const std::vector<Detection> d{{{0, 0, 5, 5}, 0, 0.9}, {{0, 0, 5, 5}, 1, 0.8}};
  EXPECT_EQ(nms(d, 0.1).size(), 2u);
}

TEST(Nms, ThresholdIsExclusive) {
  // IoU exactly 1/7 is kept at threshold 1/7.
  const std::vector<Detection> d{{{0, 0, 2, 2}, 0, 0.9}, {{1, 1, 3, 3}, 0, 0.8}};
  EXPECT_EQ(nms(d, 1.0 / 7.0).size(), 2u);
  EXPECT_EQ(nms(d, 0.14).size(), 1u);
}

TEST(Nms, ThresholdOneReturnsAllSorted) {
  std::mt19937_64 rng(5);
  std::vector<Detection> d;
  for (int i = 0; i < 10; ++i) d.push_back({oracle::grid_box(rng), i % 2, (i * 7 % 10) / 10.0});
  const auto out = nms(d, 1.0);
  ASSERT_EQ(out.size(), d.size());
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].score, out[i].score);
}

TEST(Nms, TiesBreakByClassThenInputOrder) {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 2, 0.5}, {{5, 5, 6, 6}, 1, 0.5}, {{9, 9, 10, 10}, 1, 0.5}};
  const auto out = nms(d, 0.5);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], d[1]);
  EXPECT_EQ(out[1], d[2]);
  EXPECT_EQ(out[2], d[0]);
}

TEST(Nms, RejectsThresholdOutsideUnitInterval) {
  const std::vector<Detection> d;
  EXPECT_THROW(nms(d, -0.1), GeometryError);
  EXPECT_THROW(nms(d, 1.1), GeometryError);
}

TEST(Nms, MatchesExhaustiveOracleAndProperties) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(0, 12), cls(0, 2), score(0, 20);
  std::uniform_int_distribution<int> thr(0, 20);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Detection> d;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) d.push_back({oracle::grid_box(rng, 20), cls(rng), score(rng) / 20.0});
    const double t = thr(rng) / 20.0;
    const auto out = nms(d, t);
    ASSERT_EQ(out, oracle::greedy_nms(d, t)) << "trial " << trial;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (i > 0) {
        EXPECT_GE(out[i - 1].score, out[i].score);
      }
      EXPECT_NE(std::find(d.begin(), d.end(), out[i]), d.end());
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[i].class_id == out[j].class_id) {
          EXPECT_LE(iou(out[i].box, out[j].box), t);
        }
      }
    }
  }
}

TEST(Deltas, IdentityEncodesToZero) {
  const BoundingBox a{3, 4, 13, 24};
  EXPECT_EQ(encode_deltas(a, a), BoxDelta{});
  EXPECT_EQ(decode_deltas(a, BoxDelta{}), a);
}

TEST(Deltas, HandExample) {
  const auto d = encode_deltas({0, 0, 10, 10}, {0, 0, 10, 20});
  EXPECT_DOUBLE_EQ(d.d_center_x, 0.0);
  EXPECT_DOUBLE_EQ(d.d_center_y, 0.5);
  EXPECT_DOUBLE_EQ(d.d_width, 0.0);
  EXPECT_DOUBLE_EQ(d.d_height, std::log(2.0));
  const auto b = decode_deltas({0, 0, 10, 10}, {0, 0.5, 0, std::log(2.0)});
  EXPECT_NEAR(b.x_min, 0, 1e-12);
  EXPECT_NEAR(b.y_min, 0, 1e-12);
  EXPECT_NEAR(b.x_max, 10, 1e-12);
  EXPECT_NEAR(b.y_max, 20, 1e-12);
}

TEST(Deltas, RejectsDegenerateBoxes) {
  EXPECT_THROW(encode_deltas({0, 0, 10, 10}, {5, 0, 5, 10}), GeometryError);
  EXPECT_THROW(encode_deltas({0, 0, 0, 10}, {0, 0, 5, 10}), GeometryError);
}

TEST(Deltas, RoundTripOnRandomPairs) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> pos(-500, 500), size(0.5, 400);
  auto rel = [](double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); };
  for (int i = 0; i < 1000; ++i) {
    const auto a = BoundingBox::from_center(pos(rng), pos(rng), size(rng), size(rng));
    const auto b = BoundingBox::from_center(pos(rng), pos(rng), size(rng), size(rng));
    const auto back = decode_deltas(a, encode_deltas(a, b));
    EXPECT_LE(rel(back.x_min, b.x_min), 1e-9);
    EXPECT_LE(rel(back.y_min, b.y_min), 1e-9);
    EXPECT_LE(rel(back.x_max, b.x_max), 1e-9);
    EXPECT_LE(rel(back.y_max, b.y_max), 1e-9);
  }
}

TEST(Deltas, ClipToImage) {
  const auto c = clip_to_image({-5, -5, 2000, 1100}, 1920, 1072);
  EXPECT_EQ(c, (BoundingBox{0, 0, 1920, 1072}));
}

TEST(RpnAssign, NoGroundTruthMeansAllBackground) {
  const std::vector<BoundingBox> anchors{{0, 0, 5, 5}, {1, 1, 9, 9}}, gts;
  for (const auto& l : assign_rpn_labels(anchors, gts)) EXPECT_TRUE(l.is_background());
}

TEST(RpnAssign, AnchorEqualToGtIsForeground) {
  const std::vector<BoundingBox> anchors{{0, 0, 5, 5}, {20, 20, 30, 30}}, gts{{20, 20, 30, 30}};
  const auto labels = assign_rpn_labels(anchors, gts, {1.0, 0.3});
  EXPECT_EQ(labels[1], AssignmentLabel::foreground(0));
}

TEST(RpnAssign, MatchesMaxIouOracleAndEveryGtHasForeground) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BoundingBox> anchors, gts;
    for (int i = 0; i < 20; ++i) anchors.push_back(oracle::grid_box(rng, 30));
    for (int i = 0; i < 3; ++i) gts.push_back(oracle::grid_box(rng, 30));
    const auto labels = assign_rpn_labels(anchors, gts);
    ASSERT_EQ(labels.size(), anchors.size());

    // Threshold labels per anchor.
    std::vector<AssignmentLabel> expected(anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      double best = -1;
      int arg = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double o = oracle::overlap(anchors[a], gts[g]);
        if (o > best) {
          best = o;
          arg = static_cast<int>(g);
        }
      }
      if (best >= 0.7) expected[a] = AssignmentLabel::foreground(arg);
      else if (best < 0.3) expected[a] = AssignmentLabel::background();
      else expected[a] = AssignmentLabel::ignore();
    }
    // Promotion of each gt's best anchor.
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double best = -1;
      std::size_t arg = 0;
      for (std::size_t a = 0; a < anchors.size(); ++a) {
        const double o = oracle::overlap(anchors[a], gts[g]);
        if (o > best) {
          best = o;
          arg = a;
        }
      }
      if (!expected[arg].is_foreground()) expected[arg] = AssignmentLabel::foreground(static_cast<int>(g));
    }
    ASSERT_EQ(labels, expected) << "trial " << trial;

    // Each gt's best anchor ends up foreground.
    for (const auto& g : gts) {
      std::size_t arg = 0;
      for (std::size_t a = 1; a < anchors.size(); ++a) {
        if (iou(anchors[a], g) > iou(anchors[arg], g)) arg = a;
      }
      EXPECT_TRUE(labels[arg].is_foreground());
    }
  }
}

TEST(Minibatch, RespectsCapAndSkipsIgnore) {
  std::vector<AssignmentLabel> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(AssignmentLabel::foreground(0));
  for (int i = 0; i < 300; ++i) labels.push_back(AssignmentLabel::background());
  for (int i = 0; i < 50; ++i) labels.push_back(AssignmentLabel::ignore());
  const auto idx = sample_minibatch(labels, 256, 0.5, 7);
  ASSERT_EQ(idx.size(), 256u);
  std::size_t fg = 0;
  std::set<std::size_t> seen;
  for (auto i : idx) {
    EXPECT_FALSE(labels[i].is_ignore());
    fg += labels[i].is_foreground();
    EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(fg, 128u);
  EXPECT_EQ(idx, sample_minibatch(labels, 256, 0.5, 7));
}

TEST(Minibatch, FewForegroundFilledWithBackground) {
  std::vector<AssignmentLabel> labels(10, AssignmentLabel::background());
  labels[3] = AssignmentLabel::foreground(0);
  const auto idx = sample_minibatch(labels, 256);
  EXPECT_EQ(idx.size(), 10u);
  EXPECT_EQ(idx.front(), 3u);
}

TEST(Minibatch, AllIgnoreGivesEmpty) {
  const std::vector<AssignmentLabel> labels(10, AssignmentLabel::ignore());
  EXPECT_TRUE(sample_minibatch(labels).empty());
}

TEST(ProposalAssign, ThresholdBands) {
  const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 4}};
  const std::vector<BoundingBox> props{{0, 0, 10, 10}, {0, 0, 10, 3}, {0, 0, 10, 0.5}, {50, 50, 60, 60}};
  const auto labels = assign_proposal_labels(props, gts);
  EXPECT_EQ(labels[0], AssignmentLabel::foreground(0, 4));
  EXPECT_TRUE(labels[1].is_background());  // IoU 0.3
  EXPECT_TRUE(labels[2].is_ignore());      // IoU 0.05
  EXPECT_TRUE(labels[3].is_ignore());
}

TEST(ProposalAssign, MatchesThresholdScan) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<BoundingBox> props;
    for (int i = 0; i < 4; ++i) gts.push_back({oracle::grid_box(rng, 25), i % 3 + 1});
    for (int i = 0; i < 15; ++i) props.push_back(oracle::grid_box(rng, 25));
    const auto labels = assign_proposal_labels(props, gts);
    for (std::size_t p = 0; p < props.size(); ++p) {
      double best = -1;
      int arg = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double o = oracle::overlap(props[p], gts[g].box);
        if (o > best) {
          best = o;
          arg = static_cast<int>(g);
        }
      }
      if (best >= 0.5) {
        EXPECT_EQ(labels[p], AssignmentLabel::foreground(arg, gts[static_cast<std::size_t>(arg)].class_id));
      } else if (best >= 0.1) {
        EXPECT_TRUE(labels[p].is_background());
      } else {
        EXPECT_TRUE(labels[p].is_ignore());
      }
    }
  }
}
