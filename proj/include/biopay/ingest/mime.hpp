#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace biopay::ingest {

struct Attachment {
  std::string filename;
  std::string content_type;  // lowercased type/subtype
  std::string bytes;         // transfer-decoded

  bool is_image() const;
};

struct MailEnvelope {
  std::string sender;     // reverse-path without angle brackets
  std::string recipient;  // forward-path without angle brackets
  std::string subject;
  std::string body;       // first text/plain part
  std::vector<Attachment> attachments;
  std::map<std::string, std::string> headers;  // lowercased names, unfolded values

  const Attachment* first_image() const;
  std::optional<std::string> header(std::string_view name) const;
};

// Parses an RFC 5322 message with MIME multipart bodies. Base64 and
// quoted-printable parts are decoded; undecodable parts are kept raw.
// Never throws on malformed input.
MailEnvelope parse_mail_message(std::string_view raw);

// Local part of an address: "camera07@reserve" -> "camera07".
std::string address_local_part(std::string_view address);

}  // namespace biopay::ingest
