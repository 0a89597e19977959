#include "biopay/ingest/replay.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "biopay/ingest/backend.hpp"
#include "biopay/util/digest.hpp"

namespace biopay::ingest {

using nlohmann::json;

namespace {

TraceRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
  TraceRecord r;
  if (j.contains("event_id") && !j["event_id"].is_null()) {
    r.event_id = j["event_id"].get<std::string>();
    if (r.event_id->empty()) throw std::invalid_argument("empty event_id");
  }
  r.camera_id = j.at("camera_id").get<std::string>();
  if (r.camera_id.empty()) throw std::invalid_argument("empty camera_id");
  const auto at = util::parse_rfc3339(j.at("captured_at").get<std::string>());
  if (!at) throw std::invalid_argument("captured_at is not RFC 3339");
  r.captured_at = *at;
  if (j.contains("detections")) {
    const auto& dets = j["detections"];
    if (!dets.is_array()) throw std::invalid_argument("detections must be an array");
    for (const auto& d : dets) r.detections.push_back(detection_from_json(d));
  }
  return r;
}

}  // namespace

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto r = record_from_json(json::parse(line));
      r.line = n;
      trace.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      trace.warnings.push_back({n, e.what()});
    }
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  return parse_trace(in);
}

std::string trace_line(const TraceRecord& r) {
  json dets = json::array();
  for (const auto& d : r.detections) dets.push_back(detection_to_json(d));
  json j;
  if (r.event_id) j["event_id"] = *r.event_id;
  j["camera_id"] = r.camera_id;
  j["captured_at"] = util::format_rfc3339(r.captured_at);
  j["detections"] = dets;
  return j.dump();
}

ImageJob job_from_trace(const TraceRecord& r) {
  ImageJob job;
  job.camera_id = r.camera_id;
  job.captured_at = r.captured_at;
  job.source = EventSource::Replay;
  // No pixels in a trace: the detections stand in for the image content.
  json dets = json::array();
  for (const auto& d : r.detections) dets.push_back(detection_to_json(d));
  job.image_bytes = dets.dump();
  job.event_id = r.event_id ? *r.event_id : event_digest(r.camera_id, r.captured_at, job.image_bytes);
  job.image_ref = "trace:" + std::to_string(r.line);
  job.fixture_detections = r.detections;
  return job;
}

Replayer::Replayer(double speed, SleepFn sleep) : speed_(speed), sleep_(std::move(sleep)) {
  if (!(speed >= 0.0)) throw std::invalid_argument("replay speed must be >= 0");
}

std::vector<ImageJob> Replayer::schedule(const Trace& trace) const {
  std::vector<std::size_t> order(trace.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace.records[a].captured_at < trace.records[b].captured_at;
  });
  std::vector<ImageJob> jobs;
  jobs.reserve(order.size());
  for (auto i : order) jobs.push_back(job_from_trace(trace.records[i]));
  return jobs;
}

std::size_t Replayer::run(const Trace& trace, const std::function<void(ImageJob)>& sink) const {
  auto jobs = schedule(trace);
  std::optional<util::Timestamp> previous;
  for (auto& job : jobs) {
    if (speed_ > 0.0 && previous) {
      const auto gap = std::chrono::duration<double, std::milli>(job.captured_at - *previous) / speed_;
      const auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(gap.count()));
      if (delay.count() > 0) {
        if (sleep_) sleep_(delay);
        else std::this_thread::sleep_for(delay);
      }
    }
    previous = job.captured_at;
    sink(std::move(job));
  }
  return jobs.size();
}

std::vector<TraceRecord> synthetic_trace(
    const std::vector<std::pair<std::string, std::uint64_t>>& counts,
    const SyntheticTraceOptions& options) {
  if (options.cameras <= 0) throw std::invalid_argument("synthetic trace needs cameras");
  std::vector<std::size_t> species;
  for (std::size_t i = 0; i < counts.size(); ++i) species.insert(species.end(), counts[i].second, i);
  std::mt19937_64 rng(options.seed);
  std::shuffle(species.begin(), species.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TraceRecord> out;
  out.reserve(species.size());
  for (std::size_t k = 0; k < species.size(); ++k) {
    TraceRecord r;
    r.line = k + 1;
    r.event_id = "syn-" + std::to_string(k + 1);
    char cam[32];
    std::snprintf(cam, sizeof cam, "camera%02d", static_cast<int>(k % options.cameras) + 1);
    r.camera_id = cam;
    r.captured_at = options.start + options.spacing * static_cast<std::int64_t>(k);
    const double w = std::floor(50 + unit(rng) * 400);
    const double h = std::floor(50 + unit(rng) * 300);
    const double x = std::floor(unit(rng) * (options.width - w));
    const double y = std::floor(unit(rng) * (options.height - h));
    const double score = std::round((0.5 + 0.5 * unit(rng)) * 1000) / 1000;
    r.detections.push_back({counts[species[k]].first, {x, y, x + w, y + h}, score});
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << trace_line(r) << '\n';
}

}  // namespace biopay::ingest
