#include "biopay/ingest/voc.hpp"

#include <charconv>

#include "biopay/ingest/xml.hpp"

namespace biopay::ingest {

VocValidationError::VocValidationError(const std::string& what, int object_index)
    : std::runtime_error(object_index >= 0
                             ? "object " + std::to_string(object_index) + ": " + what
                             : what),
      object_index_(object_index) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

const XmlElement& require(const XmlElement& parent, std::string_view name, int object_index) {
  const XmlElement* c = parent.child(name);
  if (!c) {
    throw VocValidationError("missing <" + std::string(name) + "> in <" + parent.name + ">",
                             object_index);
  }
  return *c;
}

// Integer pixel value; "12.0" style integral decimals are accepted too.
int read_int(const XmlElement& el, int object_index) {
  const auto text = trim(el.text);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc() && ptr != text.data()) {
    std::string_view rest(ptr, text.data() + text.size() - ptr);
    if (rest.empty()) return value;
    if (rest.front() == '.' && rest.find_first_not_of('0', 1) == std::string_view::npos) {
      return value;
    }
  }
  throw VocValidationError("<" + el.name + "> at line " + std::to_string(el.line) +
                               " is not an integer: '" + std::string(text) + "'",
                           object_index);
}

void validate_box(const PixelBox& b, const ImageSize& size, int index) {
  if (b.x_min >= b.x_max || b.y_min >= b.y_max) {
    throw VocValidationError("inverted or empty box (" + std::to_string(b.x_min) + "," +
                                 std::to_string(b.y_min) + "," + std::to_string(b.x_max) + "," +
                                 std::to_string(b.y_max) + ")",
                             index);
  }
  if (b.x_min < 0 || b.y_min < 0 || b.x_max > size.width || b.y_max > size.height) {
    throw VocValidationError("box lies outside the " + std::to_string(size.width) + "x" +
                                 std::to_string(size.height) + " image",
                             index);
  }
}

}  // namespace

void validate(const AnnotationDoc& doc) {
  if (doc.size.width <= 0 || doc.size.height <= 0) {
    throw VocValidationError("image size must be positive", -1);
  }
  for (std::size_t i = 0; i < doc.objects.size(); ++i) {
    validate_box(doc.objects[i].box, doc.size, static_cast<int>(i));
  }
}

AnnotationDoc parse_voc_xml(std::string_view bytes) {
  const XmlElement root = parse_xml(bytes);
  if (root.name != "annotation") {
    throw VocValidationError("root element is <" + root.name + ">, expected <annotation>", -1);
  }
  AnnotationDoc doc;
  doc.filename = std::string(trim(require(root, "filename", -1).text));
  const XmlElement& size = require(root, "size", -1);
  doc.size.width = read_int(require(size, "width", -1), -1);
  doc.size.height = read_int(require(size, "height", -1), -1);
  if (const XmlElement* depth = size.child("depth")) doc.size.depth = read_int(*depth, -1);
  if (doc.size.width <= 0 || doc.size.height <= 0) {
    throw VocValidationError("image size must be positive", -1);
  }

  int index = 0;
  for (const XmlElement* obj : root.children_named("object")) {
    VocObject o;
    o.name = std::string(trim(require(*obj, "name", index).text));
    const XmlElement& bb = require(*obj, "bndbox", index);
    o.box.x_min = read_int(require(bb, "xmin", index), index);
    o.box.y_min = read_int(require(bb, "ymin", index), index);
    o.box.x_max = read_int(require(bb, "xmax", index), index);
    o.box.y_max = read_int(require(bb, "ymax", index), index);
    validate_box(o.box, doc.size, index);
    doc.objects.push_back(std::move(o));
    ++index;
  }
  return doc;
}

std::string serialize_voc_xml(const AnnotationDoc& doc) {
  std::string out = "<annotation>\n";
  out += "  <filename>" + xml_escape(doc.filename) + "</filename>\n";
  out += "  <size>\n";
  out += "    <width>" + std::to_string(doc.size.width) + "</width>\n";
  out += "    <height>" + std::to_string(doc.size.height) + "</height>\n";
  out += "    <depth>" + std::to_string(doc.size.depth) + "</depth>\n";
  out += "  </size>\n";
  for (const auto& o : doc.objects) {
    out += "  <object>\n";
    out += "    <name>" + xml_escape(o.name) + "</name>\n";
    out += "    <bndbox>\n";
    out += "      <xmin>" + std::to_string(o.box.x_min) + "</xmin>\n";
    out += "      <ymin>" + std::to_string(o.box.y_min) + "</ymin>\n";
    out += "      <xmax>" + std::to_string(o.box.x_max) + "</xmax>\n";
    out += "      <ymax>" + std::to_string(o.box.y_max) + "</ymax>\n";
    out += "    </bndbox>\n";
    out += "  </object>\n";
  }
  out += "</annotation>\n";
  return out;
}

}  // namespace biopay::ingest
