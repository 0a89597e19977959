#include "biopay/ingest/xml.hpp"

#include <cctype>
#include <cstdint>

namespace biopay::ingest {

XmlError::XmlError(const std::string& what, int line, int column)
    : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                         std::to_string(column)),
      line_(line),
      column_(column) {}

const XmlElement* XmlElement::child(std::string_view child_name) const {
  for (const auto& c : children) {
    if (c.name == child_name) return &c;
  }
  return nullptr;
}

std::vector<const XmlElement*> XmlElement::children_named(std::string_view child_name) const {
  std::vector<const XmlElement*> out;
  for (const auto& c : children) {
    if (c.name == child_name) out.push_back(&c);
  }
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view doc) : doc_(doc) {}

  XmlElement parse_document() {
    skip_misc();
    if (at_end()) fail("document has no root element");
    if (!peek_is("<")) fail("expected '<'");
    XmlElement root = parse_element();
    skip_misc();
    if (!at_end()) fail("content after the root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw XmlError(what, line_, col_); }

  bool at_end() const { return pos_ >= doc_.size(); }
  char peek() const { return at_end() ? '\0' : doc_[pos_]; }
  bool peek_is(std::string_view s) const { return doc_.substr(pos_, s.size()) == s; }

  char advance() {
    if (at_end()) fail("unexpected end of document");
    const char c = doc_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void expect(std::string_view s) {
    if (!peek_is(s)) fail("expected '" + std::string(s) + "'");
    for (std::size_t i = 0; i < s.size(); ++i) advance();
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  void skip_until(std::string_view terminator, const char* what) {
    while (!peek_is(terminator)) {
      if (at_end()) fail(std::string("unterminated ") + what);
      advance();
    }
    expect(terminator);
  }

  // Prolog, comments, PIs and DOCTYPE outside the root.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (peek_is("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek_is("<!--")) {
        skip_until("-->", "comment");
      } else if (peek_is("<!DOCTYPE")) {
        skip_until(">", "DOCTYPE");
      } else {
        return;
      }
    }
  }

  static bool name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
           static_cast<unsigned char>(c) >= 0x80;
  }
  static bool name_char(char c) {
    return name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
  }

  std::string parse_name() {
    if (!name_start(peek())) fail("expected a name");
    std::string name;
    while (!at_end() && name_char(peek())) name.push_back(advance());
    return name;
  }

  void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid character reference");
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  void parse_entity(std::string& out) {
    expect("&");
    std::string ref;
    while (peek() != ';') {
      if (at_end() || ref.size() > 10) fail("unterminated entity reference");
      ref.push_back(advance());
    }
    advance();
    if (ref == "lt") out.push_back('<');
    else if (ref == "gt") out.push_back('>');
    else if (ref == "amp") out.push_back('&');
    else if (ref == "quot") out.push_back('"');
    else if (ref == "apos") out.push_back('\'');
    else if (ref.size() > 1 && ref[0] == '#') {
      const bool hex = ref[1] == 'x';
      const std::string digits = ref.substr(hex ? 2 : 1);
      if (digits.empty()) fail("empty character reference");
      std::uint32_t cp = 0;
      for (char c : digits) {
        const bool ok = hex ? std::isxdigit(static_cast<unsigned char>(c)) != 0
                            : std::isdigit(static_cast<unsigned char>(c)) != 0;
        if (!ok) fail("bad character reference");
        cp = cp * (hex ? 16 : 10) +
             static_cast<std::uint32_t>(std::isdigit(static_cast<unsigned char>(c))
                                            ? c - '0'
                                            : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
        if (cp > 0x10FFFF) fail("invalid character reference");
      }
      append_utf8(out, cp);
    } else {
      fail("unknown entity '&" + ref + ";'");
    }
  }

  std::string parse_attribute_value() {
    const char quote = peek();
    if (quote != '"' && quote != '\'') fail("expected a quoted attribute value");
    advance();
    std::string value;
    while (peek() != quote) {
      if (at_end()) fail("unterminated attribute value");
      if (peek() == '<') fail("'<' in attribute value");
      if (peek() == '&') {
        parse_entity(value);
      } else {
        value.push_back(advance());
      }
    }
    advance();
    return value;
  }

  XmlElement parse_element() {
    if (++depth_ > kMaxDepth) fail("elements nested too deeply");
    XmlElement el;
    el.line = line_;
    el.column = col_;
    expect("<");
    el.name = parse_name();
    for (;;) {
      const bool had_space = !at_end() && std::isspace(static_cast<unsigned char>(peek()));
      skip_ws();
      if (peek_is("/>")) {
        expect("/>");
        --depth_;
        return el;
      }
      if (peek_is(">")) {
        advance();
        break;
      }
      if (!had_space) fail("expected whitespace before attribute");
      std::string attr = parse_name();
      skip_ws();
      expect("=");
      skip_ws();
      el.attributes.emplace_back(std::move(attr), parse_attribute_value());
    }

    for (;;) {
      if (at_end()) fail("unterminated element <" + el.name + ">");
      if (peek_is("</")) {
        expect("</");
        const std::string closing = parse_name();
        if (closing != el.name) {
          fail("mismatched closing tag </" + closing + "> for <" + el.name + ">");
        }
        skip_ws();
        expect(">");
        --depth_;
        return el;
      }
      if (peek_is("<!--")) {
        skip_until("-->", "comment");
      } else if (peek_is("<![CDATA[")) {
        expect("<![CDATA[");
        while (!peek_is("]]>")) {
          if (at_end()) fail("unterminated CDATA section");
          el.text.push_back(advance());
        }
        expect("]]>");
      } else if (peek_is("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek_is("<")) {
        el.children.push_back(parse_element());
      } else if (peek() == '&') {
        parse_entity(el.text);
      } else {
        el.text.push_back(advance());
      }
    }
  }

  static constexpr int kMaxDepth = 256;
  std::string_view doc_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
};

}  // namespace

XmlElement parse_xml(std::string_view document) { return Reader(document).parse_document(); }

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace biopay::ingest
