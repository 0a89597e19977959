#include "biopay/app/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "biopay/util/digest.hpp"

namespace biopay::app {

using nlohmann::json;

std::vector<std::string> default_roster() {
  return {"Equus quagga",      "Giraffa camelopardalis", "Canis mesomelas",
          "Crocuta crocuta",   "Tragelaphus oryx",       "Connochaetes taurinus",
          "Acinonyx jubatus",  "Loxodonta africana",     "Hystrix cristata",
          "Papio sp",          "Panthera leo",           "Rhinocerotidae",
          std::string(kBlankClass)};
}

void RunConfig::validate() const {
  if (roster.empty()) throw ConfigError("species roster must not be empty");
  std::set<std::string> seen;
  for (const auto& name : roster) {
    if (name.empty()) throw ConfigError("species roster contains an empty name");
    if (name == ledger::kGuardianAccount) throw ConfigError("'guardian' cannot be a species");
    if (!seen.insert(name).second) throw ConfigError("duplicate species in roster: " + name);
  }
  if (species().empty()) throw ConfigError("species roster has no payable species");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw ConfigError("conf_threshold must lie in [0, 1]");
  }
  if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0)) {
    throw ConfigError("nms_threshold must lie in [0, 1]");
  }
  try {
    policy.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (backend.kind != "fixture" && backend.kind != "http") {
    throw ConfigError("backend must be 'fixture' or 'http'");
  }
  if (backend.kind == "http" && backend.url.empty()) throw ConfigError("http backend needs a url");
  if (backend.max_attempts < 1) throw ConfigError("backend.max_attempts must be >= 1");
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (gateway.cameras < 1) throw ConfigError("gateway.cameras must be >= 1");
  if (gateway.max_message_bytes == 0) throw ConfigError("max_message_bytes must be positive");
  if (folds.folds == 0 || folds.per_class == 0) throw ConfigError("fold sizes must be positive");
}

std::vector<std::string> RunConfig::species() const {
  std::vector<std::string> out;
  for (const auto& name : roster) {
    if (name != kBlankClass) out.push_back(name);
  }
  return out;
}

std::optional<std::size_t> RunConfig::blank_index() const {
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (roster[i] == kBlankClass) return i;
  }
  return std::nullopt;
}

namespace {

std::string granularity_name(ledger::Granularity g) {
  return g == ledger::Granularity::PerImage ? "per_image" : "per_instance";
}

ledger::Granularity parse_granularity(const std::string& s) {
  if (s == "per_instance") return ledger::Granularity::PerInstance;
  if (s == "per_image") return ledger::Granularity::PerImage;
  throw ConfigError("granularity must be per_instance or per_image, got '" + s + "'");
}

ledger::ShortfallRule parse_shortfall(const std::string& s) {
  if (s == "skip") return ledger::ShortfallRule::Skip;
  if (s == "partial") return ledger::ShortfallRule::Partial;
  throw ConfigError("insufficient_funds must be skip or partial, got '" + s + "'");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double parse_double(std::string_view name, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(std::string(name) + " is not a number: " + v);
  return d;
}

long long parse_int(std::string_view name, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(std::string(name) + " is not an integer: " + v);
  return n;
}

std::uint16_t parse_port(std::string_view name, long long n) {
  if (n < 0 || n > 65535) throw ConfigError(std::string(name) + " is not a port");
  return static_cast<std::uint16_t>(n);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  return json{
      {"gateway",
       {{"bind_address", c.gateway.bind_address},
        {"smtp_port", c.gateway.smtp_port},
        {"http_port", c.gateway.http_port},
        {"image_dir", c.gateway.image_dir},
        {"max_message_bytes", c.gateway.max_message_bytes},
        {"smtp_workers", c.gateway.smtp_workers},
        {"cameras", c.gateway.cameras}}},
      {"backend",
       {{"kind", c.backend.kind},
        {"url", c.backend.url},
        {"timeout_ms", c.backend.timeout_ms},
        {"max_attempts", c.backend.max_attempts},
        {"initial_backoff_ms", c.backend.initial_backoff_ms},
        {"max_backoff_ms", c.backend.max_backoff_ms}}},
      {"conf_threshold", c.conf_threshold},
      {"nms_threshold", c.nms_threshold},
      {"payout",
       {{"unit_pence", c.policy.unit_amount.value},
        {"granularity", granularity_name(c.policy.granularity)},
        {"insufficient_funds",
         c.policy.insufficient_funds == ledger::ShortfallRule::Partial ? "partial" : "skip"}}},
      {"roster", c.roster},
      {"folds", {{"per_class", c.folds.per_class}, {"folds", c.folds.folds}, {"seed", c.folds.seed}}},
      {"journal_path", c.journal_path},
      {"fsync", c.fsync},
      {"workers", c.workers},
      {"reports_dir", c.reports_dir}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    reject_unknown(j,
                   {"gateway", "backend", "conf_threshold", "nms_threshold", "payout", "roster",
                    "folds", "journal_path", "fsync", "workers", "reports_dir"},
                   "config");
    if (j.contains("gateway")) {
      const auto& g = j["gateway"];
      reject_unknown(g,
                     {"bind_address", "smtp_port", "http_port", "image_dir", "max_message_bytes",
                      "smtp_workers", "cameras"},
                     "gateway");
      read(g, "bind_address", c.gateway.bind_address);
      read(g, "smtp_port", c.gateway.smtp_port);
      read(g, "http_port", c.gateway.http_port);
      read(g, "image_dir", c.gateway.image_dir);
      read(g, "max_message_bytes", c.gateway.max_message_bytes);
      read(g, "smtp_workers", c.gateway.smtp_workers);
      read(g, "cameras", c.gateway.cameras);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      reject_unknown(b,
                     {"kind", "url", "timeout_ms", "max_attempts", "initial_backoff_ms",
                      "max_backoff_ms"},
                     "backend");
      read(b, "kind", c.backend.kind);
      read(b, "url", c.backend.url);
      read(b, "timeout_ms", c.backend.timeout_ms);
      read(b, "max_attempts", c.backend.max_attempts);
      read(b, "initial_backoff_ms", c.backend.initial_backoff_ms);
      read(b, "max_backoff_ms", c.backend.max_backoff_ms);
    }
    read(j, "conf_threshold", c.conf_threshold);
    read(j, "nms_threshold", c.nms_threshold);
    if (j.contains("payout")) {
      const auto& p = j["payout"];
      reject_unknown(p, {"preset", "unit_pence", "granularity", "insufficient_funds"}, "payout");
      if (p.contains("preset")) {
        const auto preset = p["preset"].get<std::string>();
        if (preset == "tenth_pound") c.policy = ledger::PayoutPolicy::tenth_pound();
        else if (preset != "penny") throw ConfigError("unknown payout preset '" + preset + "'");
      }
      if (p.contains("unit_pence")) c.policy.unit_amount = ledger::Pence(p["unit_pence"].get<std::int64_t>());
      if (p.contains("granularity")) c.policy.granularity = parse_granularity(p["granularity"]);
      if (p.contains("insufficient_funds")) {
        c.policy.insufficient_funds = parse_shortfall(p["insufficient_funds"]);
      }
    }
    read(j, "roster", c.roster);
    if (j.contains("folds")) {
      const auto& f = j["folds"];
      reject_unknown(f, {"per_class", "folds", "seed"}, "folds");
      read(f, "per_class", c.folds.per_class);
      read(f, "folds", c.folds.folds);
      read(f, "seed", c.folds.seed);
    }
    read(j, "journal_path", c.journal_path);
    read(j, "fsync", c.fsync);
    read(j, "workers", c.workers);
    read(j, "reports_dir", c.reports_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::optional<std::string> process_env(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

void apply_env_overrides(RunConfig& c, const EnvLookup& env) {
  if (auto v = env("BIOPAY_SMTP_PORT")) c.gateway.smtp_port = parse_port("BIOPAY_SMTP_PORT", parse_int("BIOPAY_SMTP_PORT", *v));
  if (auto v = env("BIOPAY_HTTP_PORT")) c.gateway.http_port = parse_port("BIOPAY_HTTP_PORT", parse_int("BIOPAY_HTTP_PORT", *v));
  if (auto v = env("BIOPAY_BIND")) c.gateway.bind_address = *v;
  if (auto v = env("BIOPAY_IMAGE_DIR")) c.gateway.image_dir = *v;
  if (auto v = env("BIOPAY_MAX_MESSAGE_BYTES")) {
    const auto n = parse_int("BIOPAY_MAX_MESSAGE_BYTES", *v);
    if (n <= 0) throw ConfigError("BIOPAY_MAX_MESSAGE_BYTES must be positive");
    c.gateway.max_message_bytes = static_cast<std::size_t>(n);
  }
  if (auto v = env("BIOPAY_BACKEND")) c.backend.kind = *v;
  if (auto v = env("BIOPAY_BACKEND_URL")) c.backend.url = *v;
  if (auto v = env("BIOPAY_CONF_THRESHOLD")) c.conf_threshold = parse_double("BIOPAY_CONF_THRESHOLD", *v);
  if (auto v = env("BIOPAY_NMS_THRESHOLD")) c.nms_threshold = parse_double("BIOPAY_NMS_THRESHOLD", *v);
  if (auto v = env("BIOPAY_JOURNAL")) c.journal_path = *v;
  if (auto v = env("BIOPAY_UNIT_PENCE")) c.policy.unit_amount = ledger::Pence(parse_int("BIOPAY_UNIT_PENCE", *v));
  if (auto v = env("BIOPAY_GRANULARITY")) c.policy.granularity = parse_granularity(*v);
  if (auto v = env("BIOPAY_WORKERS")) {
    const auto n = parse_int("BIOPAY_WORKERS", *v);
    if (n <= 0) throw ConfigError("BIOPAY_WORKERS must be positive");
    c.workers = static_cast<std::size_t>(n);
  }
  if (auto v = env("BIOPAY_REPORTS_DIR")) c.reports_dir = *v;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
  RunConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config " + path->string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config " + path->string() + " is not valid JSON: " + e.what());
    }
    c = config_from_json(j);
  }
  if (env) apply_env_overrides(c, env);
  c.validate();
  return c;
}

std::string config_digest(const RunConfig& config) {
  return util::sha256_hex(config_to_json(config).dump());
}

}  // namespace biopay::app
