#include "biopay/ingest/event.hpp"

#include <cctype>
#include <fstream>

#include "biopay/util/digest.hpp"

namespace biopay::ingest {

std::string_view to_string(EventSource s) {
  switch (s) {
    case EventSource::Smtp: return "smtp";
    case EventSource::Http: return "http";
    case EventSource::Replay: return "replay";
  }
  return "unknown";
}

ledger::PayableEvent DetectionEvent::payable() const {
  ledger::PayableEvent p{event_id, {}};
  p.species.reserve(detections.size());
  for (const auto& d : detections) p.species.push_back(d.species);
  return p;
}

void CameraConfig::validate() const {
  if (camera_id.empty()) throw std::invalid_argument("camera id must not be empty");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera resolution must be positive");
  if (!(trigger_range_m > 0.0)) throw std::invalid_argument("trigger range must be positive");
}

CameraRegistry::CameraRegistry(std::vector<CameraConfig> cameras) {
  for (auto& c : cameras) add(std::move(c));
}

CameraRegistry CameraRegistry::numbered(int count) {
  CameraRegistry r;
  for (int i = 1; i <= count; ++i) {
    CameraConfig c;
    c.camera_id = (i < 10 ? "camera0" : "camera") + std::to_string(i);
    r.add(std::move(c));
  }
  return r;
}

void CameraRegistry::add(CameraConfig camera) {
  camera.validate();
  const std::string id = camera.camera_id;
  if (!cameras_.emplace(id, std::move(camera)).second) {
    throw std::invalid_argument("duplicate camera id '" + id + "'");
  }
}

const CameraConfig* CameraRegistry::find(std::string_view camera_id) const {
  const auto it = cameras_.find(camera_id);
  return it == cameras_.end() ? nullptr : &it->second;
}

std::vector<std::string> CameraRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, c] : cameras_) out.push_back(id);
  return out;
}

void AuditLog::record(std::string kind, std::string detail) {
  std::lock_guard lock(mu_);
  entries_.push_back({clock_(), std::move(kind), std::move(detail)});
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t AuditLog::count(std::string_view kind) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.kind == kind;
  return n;
}

ImageStore::ImageStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ImageStore::put(const std::string& event_id, std::string_view bytes,
                            std::string_view extension) const {
  if (dir_.empty()) return "mem:" + event_id;
  const auto path = dir_ / (event_id + std::string(extension));
  if (!std::filesystem::exists(path)) {
    auto tmp = path;
    tmp += ".part";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw std::runtime_error("cannot write image " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }
  return path.string();
}

std::string event_digest(std::string_view camera_id, util::Timestamp captured_at,
                         std::string_view image_bytes) {
  const std::string when = util::format_rfc3339(captured_at);
  util::Sha256 h;
  h.update(camera_id).update(std::string_view("\0", 1)).update(when);
  h.update(std::string_view("\0", 1)).update(image_bytes);
  return h.hex_digest();
}

namespace {

[[noreturn]] void reject(const IntakeContext& ctx, const std::string& reason) {
  if (ctx.audit) ctx.audit->record("rejected", reason);
  throw EventRejected(reason);
}

std::string extension_for(const Attachment& a) {
  const auto dot = a.filename.rfind('.');
  if (dot != std::string::npos && a.filename.size() - dot <= 5) {
    std::string ext = a.filename.substr(dot);
    bool clean = true;
    for (char c : ext.substr(1)) clean = clean && std::isalnum(static_cast<unsigned char>(c));
    if (clean) return ext;
  }
  if (a.content_type == "image/png") return ".png";
  return ".jpg";
}

}  // namespace

ImageJob extract_event(std::string_view camera_id, std::optional<util::Timestamp> captured_at,
                       std::string_view image_bytes, EventSource source,
                       const IntakeContext& ctx) {
  if (camera_id.empty()) reject(ctx, "missing camera id");
  if (!ctx.cameras || !ctx.cameras->find(camera_id)) {
    reject(ctx, "unknown camera '" + std::string(camera_id) + "'");
  }
  if (image_bytes.empty()) reject(ctx, "missing image from camera '" + std::string(camera_id) + "'");

  ImageJob job;
  job.camera_id = std::string(camera_id);
  job.captured_at = captured_at ? *captured_at : ctx.clock();
  job.event_id = event_digest(job.camera_id, job.captured_at, image_bytes);
  job.image_bytes = std::string(image_bytes);
  job.source = source;
  job.image_ref = ctx.images ? ctx.images->put(job.event_id, image_bytes) : "mem:" + job.event_id;
  return job;
}

ImageJob extract_event(const MailEnvelope& envelope, const IntakeContext& ctx) {
  const std::string camera = address_local_part(envelope.sender);
  if (!ctx.cameras || !ctx.cameras->find(camera)) {
    reject(ctx, "unknown camera '" + camera + "' (sender " + envelope.sender + ")");
  }
  const Attachment* image = envelope.first_image();
  if (!image || image->bytes.empty()) reject(ctx, "message from '" + camera + "' has no image");

  std::optional<util::Timestamp> captured;
  if (auto h = envelope.header("x-capture-time")) captured = util::parse_rfc3339(*h);
  if (!captured) {
    if (auto h = envelope.header("date")) captured = util::parse_mail_date(*h);
  }
  ImageJob job = extract_event(camera, captured, image->bytes, EventSource::Smtp,
                               IntakeContext{ctx.cameras, nullptr, ctx.audit, ctx.clock});
  if (ctx.images) job.image_ref = ctx.images->put(job.event_id, image->bytes, extension_for(*image));
  return job;
}

}  // namespace biopay::ingest
