#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "biopay/geom/box.hpp"
#include "biopay/ingest/mime.hpp"
#include "biopay/ledger/ledger.hpp"
#include "biopay/util/time.hpp"

namespace biopay::ingest {

enum class EventSource { Smtp, Http, Replay };

std::string_view to_string(EventSource s);

// Backend output before thresholding and suppression.
struct RawDetection {
  std::string species;
  geom::BoundingBox box;
  double score = 0.0;

  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

struct DetectionEvent {
  std::string event_id;
  std::string camera_id;
  util::Timestamp captured_at;
  std::string image_ref;
  std::vector<RawDetection> detections;  // survivors only
  EventSource source = EventSource::Replay;

  bool is_blank() const { return detections.empty(); }
  ledger::PayableEvent payable() const;
};

// A unit of work queued for detection.
struct ImageJob {
  std::string event_id;
  std::string camera_id;
  util::Timestamp captured_at;
  std::string image_ref;
  std::string image_bytes;
  EventSource source = EventSource::Replay;
  // Labelled detections carried by a replay trace.
  std::optional<std::vector<RawDetection>> fixture_detections;
};

enum class TriggerSensitivity { Low, Mid, High };

struct CameraConfig {
  std::string camera_id;
  int width = 1920;
  int height = 1072;
  TriggerSensitivity trigger_sensitivity = TriggerSensitivity::High;
  double trigger_range_m = 9.0;
  std::string uplink;

  void validate() const;
};

class CameraRegistry {
 public:
  CameraRegistry() = default;
  explicit CameraRegistry(std::vector<CameraConfig> cameras);

  // camera01 … cameraNN with default settings.
  static CameraRegistry numbered(int count);

  void add(CameraConfig camera);
  const CameraConfig* find(std::string_view camera_id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const { return cameras_.size(); }

 private:
  std::map<std::string, CameraConfig, std::less<>> cameras_;
};

struct AuditEntry {
  util::Timestamp at;
  std::string kind;
  std::string detail;
};

class AuditLog {
 public:
  explicit AuditLog(util::Clock clock = util::system_now) : clock_(std::move(clock)) {}
  void record(std::string kind, std::string detail);
  std::vector<AuditEntry> entries() const;
  std::size_t count(std::string_view kind) const;

 private:
  util::Clock clock_;
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

// Writes image bytes under a directory, named by event id; without a
// directory the reference is "mem:<event_id>" and nothing is written.
class ImageStore {
 public:
  ImageStore() = default;
  explicit ImageStore(std::filesystem::path dir);

  std::string put(const std::string& event_id, std::string_view bytes,
                  std::string_view extension = ".jpg") const;

 private:
  std::filesystem::path dir_;
};

class EventRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hex SHA-256 over camera id, capture time and image bytes; retransmissions
// of the same capture collide by construction.
std::string event_digest(std::string_view camera_id, util::Timestamp captured_at,
                         std::string_view image_bytes);

struct IntakeContext {
  const CameraRegistry* cameras = nullptr;
  const ImageStore* images = nullptr;
  AuditLog* audit = nullptr;
  util::Clock clock = util::system_now;
};

// Camera id comes from the sender's local part; capture time from an
// X-Capture-Time (RFC 3339) header, else Date, else the clock.
// Throws EventRejected (and audits it) for unknown cameras or a missing image.
ImageJob extract_event(const MailEnvelope& envelope, const IntakeContext& ctx);

// Same for an HTTP upload whose metadata named the camera and optionally the
// capture time.
ImageJob extract_event(std::string_view camera_id, std::optional<util::Timestamp> captured_at,
                       std::string_view image_bytes, EventSource source,
                       const IntakeContext& ctx);

}  // namespace biopay::ingest
