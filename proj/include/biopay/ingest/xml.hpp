#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace biopay::ingest {

class XmlError : public std::runtime_error {
 public:
  XmlError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct XmlElement {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;  // direct character data, entities resolved
  std::vector<XmlElement> children;
  int line = 0;
  int column = 0;

  const XmlElement* child(std::string_view child_name) const;
  std::vector<const XmlElement*> children_named(std::string_view child_name) const;
};

// Non-validating reader: elements, attributes, character data, CDATA,
// comments, processing instructions and a DOCTYPE without an internal subset.
XmlElement parse_xml(std::string_view document);

std::string xml_escape(std::string_view text);

}  // namespace biopay::ingest
