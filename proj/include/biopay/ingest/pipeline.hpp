#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "biopay/ingest/backend.hpp"
#include "biopay/ingest/event.hpp"
#include "biopay/ledger/ledger.hpp"

namespace biopay::ingest {

struct PipelineOptions {
  double conf_threshold = kDefaultConfidenceThreshold;
  double nms_threshold = geom::kDefaultNmsThreshold;
  ledger::PayoutPolicy policy;
  RetryPolicy retry;
  std::size_t workers = 4;
  // A job whose processing throws unexpectedly goes back on the queue this
  // many times before it is dead-lettered.
  int max_deliveries = 3;
};

struct PipelineStats {
  std::uint64_t jobs = 0;        // jobs that reached a final state
  std::uint64_t events = 0;      // newly applied events, blanks included
  std::uint64_t detections = 0;  // surviving detections on applied events
  std::uint64_t blanks = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t dead_letters = 0;
  std::uint64_t transfers = 0;
  std::uint64_t skipped_payouts = 0;
  ledger::Pence paid;

  friend bool operator==(const PipelineStats&, const PipelineStats&) = default;
};

struct PipelineDeadLetter {
  std::string event_id;
  std::string reason;
};

enum class JobResult { Applied, Duplicate, DeadLettered };

// detect → ledger. Jobs flow through a queue with at-least-once delivery;
// the ledger drops repeated event ids, so each event pays once.
class Pipeline {
 public:
  Pipeline(ledger::Ledger& ledger, DetectorBackend& backend, PipelineOptions options = {});
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void start();
  void submit(ImageJob job);
  // Blocks until every submitted job reached a final state.
  void drain();
  void stop();

  // Synchronous path on the calling thread; does not need start().
  JobResult process(const ImageJob& job);

  std::optional<DetectionEvent> find_event(const std::string& event_id) const;
  PipelineStats stats() const;
  std::vector<PipelineDeadLetter> dead_letters() const;

 private:
  struct Pending {
    ImageJob job;
    int deliveries = 0;
  };

  void worker_loop();
  void dead_letter(const std::string& event_id, std::string reason);

  ledger::Ledger& ledger_;
  DetectorBackend& backend_;
  PipelineOptions options_;

  mutable std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<Pending> queue_;
  std::size_t in_flight_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;

  mutable std::mutex state_mu_;
  PipelineStats stats_;
  std::map<std::string, DetectionEvent> events_;
  std::vector<PipelineDeadLetter> dead_letters_;
};

}  // namespace biopay::ingest
