#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biopay/ingest/event.hpp"

namespace biopay::ingest {

struct TraceRecord {
  std::optional<std::string> event_id;
  std::string camera_id;
  util::Timestamp captured_at;
  std::vector<RawDetection> detections;
  std::size_t line = 0;  // 1-based source line
};

struct TraceWarning {
  std::size_t line = 0;
  std::string message;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::vector<TraceWarning> warnings;
};

// One JSON object per line. Blank lines are ignored; malformed lines are
// skipped and reported as warnings.
Trace parse_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

std::string trace_line(const TraceRecord& r);

// event_id defaults to a digest of the record's camera, time and content.
ImageJob job_from_trace(const TraceRecord& r);

using SleepFn = std::function<void(std::chrono::milliseconds)>;

// Emits jobs in capture-time order (stable for equal times). With speed > 0
// the gaps between captures are divided by speed; speed 0 runs flat out.
class Replayer {
 public:
  explicit Replayer(double speed = 0.0, SleepFn sleep = {});

  std::vector<ImageJob> schedule(const Trace& trace) const;
  // Returns the number of jobs emitted.
  std::size_t run(const Trace& trace, const std::function<void(ImageJob)>& sink) const;

 private:
  double speed_;
  SleepFn sleep_;
};

struct SyntheticTraceOptions {
  int cameras = 27;
  util::Timestamp start = util::Timestamp{std::chrono::milliseconds{1'650'000'000'000}};
  std::chrono::milliseconds spacing{1000};
  std::uint64_t seed = 0;
  int width = 1920;
  int height = 1072;
};

// One detection per event, realising the given species histogram. The
// interleaving of species is shuffled with the seed; cameras rotate.
std::vector<TraceRecord> synthetic_trace(
    const std::vector<std::pair<std::string, std::uint64_t>>& counts,
    const SyntheticTraceOptions& options = {});

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);

}  // namespace biopay::ingest
