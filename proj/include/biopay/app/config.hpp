#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "biopay/ledger/ledger.hpp"
#include "biopay/metrics/folds.hpp"

namespace biopay::app {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kBlankClass = "Blank";

// The twelve species in study order, then Blank.
std::vector<std::string> default_roster();

struct GatewayConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t smtp_port = 2525;
  std::uint16_t http_port = 8080;
  std::string image_dir;  // empty keeps images in memory only
  std::size_t max_message_bytes = 10u << 20;
  std::size_t smtp_workers = 4;
  int cameras = 27;
};

struct BackendConfig {
  std::string kind = "fixture";  // fixture | http
  std::string url;
  int timeout_ms = 10'000;
  int max_attempts = 5;
  int initial_backoff_ms = 100;
  int max_backoff_ms = 5'000;
};

struct RunConfig {
  GatewayConfig gateway;
  BackendConfig backend;
  double conf_threshold = 0.5;
  double nms_threshold = 0.6;
  ledger::PayoutPolicy policy;
  std::vector<std::string> roster = default_roster();
  metrics::FoldProtocol folds;
  std::string journal_path;  // empty: in-memory ledger
  bool fsync = true;
  std::size_t workers = 4;
  std::string reports_dir = "reports";

  void validate() const;
  // Roster without Blank: the payable accounts.
  std::vector<std::string> species() const;
  // Index of Blank in the roster, if present.
  std::optional<std::size_t> blank_index() const;
};

nlohmann::json config_to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
std::optional<std::string> process_env(std::string_view name);

// BIOPAY_SMTP_PORT, BIOPAY_HTTP_PORT, BIOPAY_BIND, BIOPAY_IMAGE_DIR,
// BIOPAY_BACKEND, BIOPAY_BACKEND_URL, BIOPAY_CONF_THRESHOLD,
// BIOPAY_NMS_THRESHOLD, BIOPAY_MAX_MESSAGE_BYTES, BIOPAY_JOURNAL,
// BIOPAY_UNIT_PENCE, BIOPAY_GRANULARITY, BIOPAY_WORKERS, BIOPAY_REPORTS_DIR.
void apply_env_overrides(RunConfig& config, const EnvLookup& env);

// File (if given) then environment, then validation.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const EnvLookup& env = process_env);

// SHA-256 of the canonical JSON form.
std::string config_digest(const RunConfig& config);

}  // namespace biopay::app
