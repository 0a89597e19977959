#include "biopay/metrics/classification.hpp"

#include <algorithm>

#include "biopay/geom/nms.hpp"

namespace biopay::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : n_(num_classes), cells_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw MetricsError("ConfusionMatrix: needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_ || predicted >= n_) throw MetricsError("ConfusionMatrix: class out of range");
  cells_[truth * n_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) throw MetricsError("ConfusionMatrix: class out of range");
  return cells_[truth * n_ + predicted];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : cells_) s += c;
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw MetricsError("ConfusionMatrix: size mismatch");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
  return *this;
}

OneVsRest one_vs_rest(const ConfusionMatrix& cm, std::size_t class_id) {
  OneVsRest r;
  r.tp = cm.at(class_id, class_id);
  r.fn = cm.row_sum(class_id) - r.tp;
  r.fp = cm.col_sum(class_id) - r.tp;
  r.tn = cm.total() - r.tp - r.fn - r.fp;
  return r;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, std::size_t class_id) {
  const auto c = one_vs_rest(cm, class_id);
  ClassMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.fp + c.tn + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  const double pr = m.precision + m.sensitivity;
  m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.sensitivity / pr;
  m.support = static_cast<double>(c.tp + c.fn);
  return m;
}

std::size_t predicted_image_class(std::span<const geom::Detection> dets, std::size_t blank_id) {
  if (dets.empty()) return blank_id;
  const auto order = geom::detection_order(dets);
  return static_cast<std::size_t>(dets[order.front()].class_id);
}

namespace {

// Sorted offsets from the minimum: independent of input order and exact
// when all values agree.
double stable_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double offsets = 0.0;
  for (double v : values) offsets += v - values.front();
  return values.front() + offsets / static_cast<double>(values.size());
}

ClassMetrics mean_of(std::span<const ClassMetrics> rows) {
  if (rows.empty()) return {};
  auto field = [&](double ClassMetrics::*member) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.*member);
    return stable_mean(std::move(v));
  };
  ClassMetrics m;
  m.accuracy = field(&ClassMetrics::accuracy);
  m.precision = field(&ClassMetrics::precision);
  m.sensitivity = field(&ClassMetrics::sensitivity);
  m.specificity = field(&ClassMetrics::specificity);
  m.f1 = field(&ClassMetrics::f1);
  m.support = field(&ClassMetrics::support);
  return m;
}

}  // namespace

MetricTable metric_table(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  if (class_names.size() != cm.num_classes()) {
    throw MetricsError("metric_table: class names do not match matrix size");
  }
  MetricTable t;
  t.class_names = std::move(class_names);
  for (std::size_t c = 0; c < cm.num_classes(); ++c) t.rows.push_back(per_class_metrics(cm, c));
  t.overall = mean_of(t.rows);
  return t;
}

MetricTable select_rows(const MetricTable& table, std::span<const std::size_t> keep) {
  MetricTable out;
  for (auto i : keep) {
    if (i >= table.rows.size()) throw MetricsError("row index out of range");
    out.class_names.push_back(table.class_names[i]);
    out.rows.push_back(table.rows[i]);
  }
  out.overall = mean_of(out.rows);
  return out;
}

MetricTable aggregate_folds(std::span<const MetricTable> folds) {
  if (folds.empty()) throw MetricsError("aggregate_folds: no folds");
  const auto& names = folds.front().class_names;
  for (const auto& f : folds) {
    if (f.class_names != names || f.rows.size() != names.size()) {
      throw MetricsError("aggregate_folds: folds disagree on the class set");
    }
  }
  MetricTable out;
  out.class_names = names;
  std::vector<ClassMetrics> column(folds.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    for (std::size_t f = 0; f < folds.size(); ++f) column[f] = folds[f].rows[c];
    out.rows.push_back(mean_of(column));
  }
  out.overall = mean_of(out.rows);
  return out;
}

}  // namespace biopay::metrics
