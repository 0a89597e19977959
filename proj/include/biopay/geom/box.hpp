#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace biopay::geom {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Axis-aligned box in continuous pixel coordinates, corner form.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return x_min + 0.5 * width(); }
  double center_y() const { return y_min + 0.5 * height(); }

  bool is_valid() const { return x_min <= x_max && y_min <= y_max; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruth {
  BoundingBox box;
  int class_id = 0;
};

// |a ∩ b| / |a ∪ b|, or 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

// Column storage used by the batched IoU kernels.
class BoxBatch {
 public:
  BoxBatch() = default;
  explicit BoxBatch(std::span<const BoundingBox> boxes);

  void push_back(const BoundingBox& box);
  std::size_t size() const { return x_min_.size(); }
  bool empty() const { return x_min_.empty(); }
  BoundingBox operator[](std::size_t i) const {
    return {x_min_[i], y_min_[i], x_max_[i], y_max_[i]};
  }

  // out[i] = iou(box, this[i]); out.size() must equal size().
  void iou_against(const BoundingBox& box, std::span<double> out) const;

 private:
  std::vector<double> x_min_, y_min_, x_max_, y_max_;
};

// Row-major |rows| x |cols| IoU table.
std::vector<double> iou_matrix(std::span<const BoundingBox> rows,
                               std::span<const BoundingBox> cols);

}  // namespace biopay::geom
