#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "biopay/geom/box.hpp"

namespace biopay::ingest {

struct PixelBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  geom::BoundingBox to_box() const { return {double(x_min), double(y_min), double(x_max), double(y_max)}; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  int depth = 3;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

struct VocObject {
  std::string name;
  PixelBox box;

  friend bool operator==(const VocObject&, const VocObject&) = default;
};

struct AnnotationDoc {
  std::string filename;
  ImageSize size;
  std::vector<VocObject> objects;

  friend bool operator==(const AnnotationDoc&, const AnnotationDoc&) = default;
};

// Structural or geometric problem in an otherwise well-formed document.
// object_index is -1 when the problem is not tied to one object.
class VocValidationError : public std::runtime_error {
 public:
  VocValidationError(const std::string& what, int object_index);
  int object_index() const { return object_index_; }

 private:
  int object_index_;
};

// Throws XmlError (with line/column) for malformed XML and
// VocValidationError for inverted or out-of-image boxes.
AnnotationDoc parse_voc_xml(std::string_view bytes);

// Canonical layout: filename, size, then objects in order; two-space indent.
std::string serialize_voc_xml(const AnnotationDoc& doc);

void validate(const AnnotationDoc& doc);

}  // namespace biopay::ingest
