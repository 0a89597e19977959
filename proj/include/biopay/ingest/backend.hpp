#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "biopay/geom/nms.hpp"
#include "biopay/ingest/event.hpp"

namespace biopay::ingest {

inline constexpr double kDefaultConfidenceThreshold = 0.5;

// Transient failure: the job may be retried.
class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The backend answered with something unusable; retrying will not help.
class BackendProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<RawDetection> infer(const ImageJob& job) = 0;
};

// Serves labelled detections: those carried by the job itself, else a table
// keyed by event id, else nothing (a blank).
class FixtureBackend : public DetectorBackend {
 public:
  FixtureBackend() = default;
  explicit FixtureBackend(std::map<std::string, std::vector<RawDetection>> by_event)
      : by_event_(std::move(by_event)) {}

  std::vector<RawDetection> infer(const ImageJob& job) override;

 private:
  std::map<std::string, std::vector<RawDetection>> by_event_;
};

// JSON over HTTP: POST <base>/v1/infer with
//   {"event_id", "camera_id", "captured_at", "image_base64"}
// answered by {"detections": [{"class", "score", "box": [x0, y0, x1, y1]}]}.
class HttpDetectorBackend : public DetectorBackend {
 public:
  explicit HttpDetectorBackend(std::string base_url,
                               std::chrono::milliseconds timeout = std::chrono::seconds(10));
  std::vector<RawDetection> infer(const ImageJob& job) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

nlohmann::json detection_to_json(const RawDetection& d);
// Throws BackendProtocolError on a malformed entry.
RawDetection detection_from_json(const nlohmann::json& j);
nlohmann::json event_to_json(const DetectionEvent& e);

// Score filter then per-species NMS. Throws BackendUnavailable /
// BackendProtocolError from the backend unchanged.
DetectionEvent detect(const ImageJob& job, DetectorBackend& backend,
                      double conf_threshold = kDefaultConfidenceThreshold,
                      double nms_threshold = geom::kDefaultNmsThreshold);

// Threshold and suppression without a backend; shared by detect().
std::vector<RawDetection> postprocess(const std::vector<RawDetection>& raw, double conf_threshold,
                                      double nms_threshold);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds max_backoff{5000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleep_for

  // Delay before attempt `attempt` (2-based): initial·2^(attempt−2), capped.
  std::chrono::milliseconds backoff_before(int attempt) const;
};

struct DetectOutcome {
  std::optional<DetectionEvent> event;
  std::optional<std::string> dead_letter_reason;
  int attempts = 0;
};

DetectOutcome detect_with_retry(const ImageJob& job, DetectorBackend& backend,
                                double conf_threshold, double nms_threshold,
                                const RetryPolicy& retry);

}  // namespace biopay::ingest
