#include "biopay/ingest/backend.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>

#include "biopay/util/digest.hpp"

namespace biopay::ingest {

using nlohmann::json;

std::vector<RawDetection> FixtureBackend::infer(const ImageJob& job) {
  if (job.fixture_detections) return *job.fixture_detections;
  const auto it = by_event_.find(job.event_id);
  if (it != by_event_.end()) return it->second;
  return {};
}

json detection_to_json(const RawDetection& d) {
  return json{{"class", d.species},
              {"score", d.score},
              {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}};
}

RawDetection detection_from_json(const json& j) {
  try {
    RawDetection d;
    d.species = j.at("class").get<std::string>();
    d.score = j.at("score").get<double>();
    const auto& box = j.at("box");
    if (!box.is_array() || box.size() != 4) throw BackendProtocolError("box must have 4 numbers");
    d.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
             box[3].get<double>()};
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw BackendProtocolError("score outside [0, 1]");
    if (!d.box.is_valid() || !std::isfinite(d.box.area())) {
      throw BackendProtocolError("inverted or non-finite box");
    }
    if (d.species.empty()) throw BackendProtocolError("empty class name");
    return d;
  } catch (const json::exception& e) {
    throw BackendProtocolError(std::string("malformed detection: ") + e.what());
  }
}

json event_to_json(const DetectionEvent& e) {
  json dets = json::array();
  for (const auto& d : e.detections) dets.push_back(detection_to_json(d));
  return json{{"event_id", e.event_id},
              {"camera_id", e.camera_id},
              {"captured_at", util::format_rfc3339(e.captured_at)},
              {"image_ref", e.image_ref},
              {"source", std::string(to_string(e.source))},
              {"detections", dets}};
}

HttpDetectorBackend::HttpDetectorBackend(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::vector<RawDetection> HttpDetectorBackend::infer(const ImageJob& job) {
  httplib::Client client(base_url_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const json request{{"event_id", job.event_id},
                     {"camera_id", job.camera_id},
                     {"captured_at", util::format_rfc3339(job.captured_at)},
                     {"image_base64", util::base64_encode(job.image_bytes)}};
  auto res = client.Post("/v1/infer", request.dump(), "application/json");
  if (!res) {
    throw BackendUnavailable("detector backend unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429) {
    throw BackendUnavailable("detector backend answered " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendProtocolError("detector backend answered " + std::to_string(res->status));
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendProtocolError(std::string("unparsable backend reply: ") + e.what());
  }
  if (!body.contains("detections") || !body["detections"].is_array()) {
    throw BackendProtocolError("backend reply lacks a detections array");
  }
  std::vector<RawDetection> out;
  for (const auto& d : body["detections"]) out.push_back(detection_from_json(d));
  return out;
}

std::vector<RawDetection> postprocess(const std::vector<RawDetection>& raw, double conf_threshold,
                                      double nms_threshold) {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw std::invalid_argument("confidence threshold must lie in [0, 1]");
  }
  // Species names become dense class ids in order of first appearance.
  std::vector<std::string> names;
  std::vector<geom::Detection> kept;
  for (const auto& d : raw) {
    if (d.score < conf_threshold) continue;
    auto it = std::find(names.begin(), names.end(), d.species);
    const auto cls = static_cast<int>(it - names.begin());
    if (it == names.end()) names.push_back(d.species);
    kept.push_back({d.box, cls, d.score});
  }
  std::vector<RawDetection> out;
  for (const auto& d : geom::nms(kept, nms_threshold)) {
    out.push_back({names[static_cast<std::size_t>(d.class_id)], d.box, d.score});
  }
  return out;
}

DetectionEvent detect(const ImageJob& job, DetectorBackend& backend, double conf_threshold,
                      double nms_threshold) {
  const auto raw = backend.infer(job);
  for (const auto& d : raw) {
    if (!(d.score >= 0.0 && d.score <= 1.0) || !d.box.is_valid()) {
      throw BackendProtocolError("backend returned an invalid detection");
    }
  }
  DetectionEvent e;
  e.event_id = job.event_id;
  e.camera_id = job.camera_id;
  e.captured_at = job.captured_at;
  e.image_ref = job.image_ref;
  e.source = job.source;
  e.detections = postprocess(raw, conf_threshold, nms_threshold);
  return e;
}

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds(0);
  auto delay = initial_backoff;
  for (int i = 2; i < attempt && delay < max_backoff; ++i) delay *= 2;
  return std::min(delay, max_backoff);
}

DetectOutcome detect_with_retry(const ImageJob& job, DetectorBackend& backend,
                                double conf_threshold, double nms_threshold,
                                const RetryPolicy& retry) {
  DetectOutcome out;
  std::string last_error;
  const int attempts = std::max(1, retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      const auto delay = retry.backoff_before(attempt);
      if (retry.sleep) retry.sleep(delay);
      else std::this_thread::sleep_for(delay);
    }
    out.attempts = attempt;
    try {
      out.event = detect(job, backend, conf_threshold, nms_threshold);
      return out;
    } catch (const BackendUnavailable& e) {
      last_error = e.what();
    } catch (const BackendProtocolError& e) {
      out.dead_letter_reason = std::string("backend protocol error: ") + e.what();
      return out;
    }
  }
  out.dead_letter_reason = "backend unavailable after " + std::to_string(out.attempts) +
                           " attempts: " + last_error;
  return out;
}

}  // namespace biopay::ingest
