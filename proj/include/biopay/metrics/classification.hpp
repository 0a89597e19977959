#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "biopay/geom/box.hpp"

namespace biopay::metrics {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Counts indexed by (true class, predicted class).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return n_; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> cells_;
};

struct OneVsRest {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

OneVsRest one_vs_rest(const ConfusionMatrix& cm, std::size_t class_id);

// Every ratio is 0 when its denominator is 0.
struct ClassMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  double support = 0.0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, std::size_t class_id);

// Image-level label: class of the highest-ranked detection, or `blank_id`
// when there is none.
std::size_t predicted_image_class(std::span<const geom::Detection> dets, std::size_t blank_id);

struct MetricTable {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> rows;
  ClassMetrics overall;  // unweighted mean over rows

  friend bool operator==(const MetricTable&, const MetricTable&) = default;
};

MetricTable metric_table(const ConfusionMatrix& cm, std::vector<std::string> class_names);

// Keeps the listed rows (in the given order) and recomputes the overall row.
MetricTable select_rows(const MetricTable& table, std::span<const std::size_t> keep);

// Unweighted per-cell mean across folds; class lists must agree exactly.
MetricTable aggregate_folds(std::span<const MetricTable> folds);

}  // namespace biopay::metrics
