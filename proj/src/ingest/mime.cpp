#include "biopay/ingest/mime.hpp"

#include <algorithm>
#include <cctype>

#include "biopay/util/digest.hpp"

namespace biopay::ingest {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && lower(s.substr(s.size() - suffix.size())) == suffix;
}

struct Part {
  std::map<std::string, std::string> headers;
  std::string_view body;
};

// Splits at the first blank line; accepts CRLF or bare LF.
Part split_part(std::string_view raw) {
  Part part;
  std::size_t pos = 0;
  std::string current_name, current_value;
  auto flush = [&] {
    if (!current_name.empty()) part.headers[current_name] = std::string(trim(current_value));
    current_name.clear();
    current_value.clear();
  };
  while (pos < raw.size()) {
    auto nl = raw.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    std::string_view line = raw.substr(pos, last ? std::string_view::npos : nl - pos);
    const std::size_t next = last ? raw.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      part.body = raw.substr(next);
      return part;
    }
    if ((line.front() == ' ' || line.front() == '\t') && !current_name.empty()) {
      current_value += " ";
      current_value += trim(line);
    } else if (const auto colon = line.find(':'); colon != std::string_view::npos) {
      flush();
      current_name = lower(trim(line.substr(0, colon)));
      current_value = std::string(line.substr(colon + 1));
    }
    pos = next;
  }
  flush();
  part.body = {};
  return part;
}

struct ContentType {
  std::string type = "text/plain";
  std::map<std::string, std::string> params;
};

ContentType parse_params(std::string_view value) {
  ContentType ct;
  std::size_t pos = value.find(';');
  ct.type = lower(trim(value.substr(0, pos)));
  while (pos != std::string_view::npos) {
    const std::size_t start = pos + 1;
    // Respect quoted values that contain ';'.
    std::size_t end = start;
    bool quoted = false;
    while (end < value.size() && (quoted || value[end] != ';')) {
      if (value[end] == '"') quoted = !quoted;
      ++end;
    }
    std::string_view item = trim(value.substr(start, end - start));
    if (const auto eq = item.find('='); eq != std::string_view::npos) {
      std::string key = lower(trim(item.substr(0, eq)));
      std::string_view val = trim(item.substr(eq + 1));
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
        val = val.substr(1, val.size() - 2);
      }
      ct.params[key] = std::string(val);
    }
    pos = end < value.size() ? end : std::string_view::npos;
  }
  return ct;
}

std::string decode_quoted_printable(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '=') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 < s.size() && (s[i + 1] == '\n' || s[i + 1] == '\r')) {
      // Soft line break.
      ++i;
      if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
    } else if (i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2])));
      i += 2;
    } else {
      out.push_back('=');
    }
  }
  return out;
}

std::string decode_body(std::string_view body, const std::map<std::string, std::string>& headers) {
  const auto it = headers.find("content-transfer-encoding");
  const std::string encoding = it == headers.end() ? "" : lower(it->second);
  if (encoding == "base64") {
    if (auto decoded = util::base64_decode(body)) return *decoded;
    return std::string(body);
  }
  if (encoding == "quoted-printable") return decode_quoted_printable(body);
  return std::string(body);
}

// Strips the CRLF that belongs to the following boundary line.
std::string_view strip_trailing_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

void walk(std::string_view raw, MailEnvelope& env, int depth) {
  if (depth > 8) return;
  const Part part = split_part(raw);
  const auto ct_it = part.headers.find("content-type");
  const ContentType ct = ct_it == part.headers.end() ? ContentType{} : parse_params(ct_it->second);

  if (ct.type.starts_with("multipart/")) {
    const auto b = ct.params.find("boundary");
    if (b == ct.params.end() || b->second.empty()) return;
    const std::string delimiter = "--" + b->second;
    std::size_t pos = 0;
    std::optional<std::size_t> part_start;
    while (pos <= part.body.size()) {
      auto nl = part.body.find('\n', pos);
      const std::size_t line_end = nl == std::string_view::npos ? part.body.size() : nl;
      std::string_view line = part.body.substr(pos, line_end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      const std::size_t next = nl == std::string_view::npos ? part.body.size() + 1 : nl + 1;
      if (line.starts_with(delimiter)) {
        if (part_start) {
          walk(strip_trailing_newline(part.body.substr(*part_start, pos - *part_start)), env,
               depth + 1);
        }
        if (trim(line.substr(delimiter.size())) == "--") return;
        part_start = std::min(next, part.body.size());
      }
      pos = next;
    }
    return;
  }

  std::string filename;
  std::string disposition;
  if (const auto cd = part.headers.find("content-disposition"); cd != part.headers.end()) {
    const ContentType parsed = parse_params(cd->second);
    disposition = parsed.type;
    if (const auto fn = parsed.params.find("filename"); fn != parsed.params.end()) {
      filename = fn->second;
    }
  }
  if (filename.empty()) {
    if (const auto n = ct.params.find("name"); n != ct.params.end()) filename = n->second;
  }

  const bool is_attachment = disposition == "attachment" || !filename.empty() ||
                             (!ct.type.starts_with("text/") && ct_it != part.headers.end());
  if (is_attachment) {
    env.attachments.push_back({filename, ct.type, decode_body(part.body, part.headers)});
  } else if (ct.type == "text/plain" && env.body.empty()) {
    env.body = decode_body(part.body, part.headers);
  }
}

}  // namespace

bool Attachment::is_image() const {
  if (content_type.starts_with("image/")) return true;
  return ends_with_ci(filename, ".jpg") || ends_with_ci(filename, ".jpeg") ||
         ends_with_ci(filename, ".png");
}

const Attachment* MailEnvelope::first_image() const {
  for (const auto& a : attachments) {
    if (a.is_image()) return &a;
  }
  return nullptr;
}

std::optional<std::string> MailEnvelope::header(std::string_view name) const {
  const auto it = headers.find(lower(name));
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

MailEnvelope parse_mail_message(std::string_view raw) {
  MailEnvelope env;
  const Part top = split_part(raw);
  env.headers = top.headers;
  if (const auto s = top.headers.find("subject"); s != top.headers.end()) env.subject = s->second;
  walk(raw, env, 0);
  return env;
}

std::string address_local_part(std::string_view address) {
  address = trim(address);
  if (!address.empty() && address.front() == '<') address.remove_prefix(1);
  if (!address.empty() && address.back() == '>') address.remove_suffix(1);
  const auto at = address.rfind('@');
  return std::string(at == std::string_view::npos ? address : address.substr(0, at));
}

}  // namespace biopay::ingest
