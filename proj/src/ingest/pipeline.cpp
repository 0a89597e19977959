#include "biopay/ingest/pipeline.hpp"

#include <stdexcept>

namespace biopay::ingest {

Pipeline::Pipeline(ledger::Ledger& ledger, DetectorBackend& backend, PipelineOptions options)
    : ledger_(ledger), backend_(backend), options_(std::move(options)) {
  options_.policy.validate();
  if (options_.workers == 0) throw std::invalid_argument("pipeline needs at least one worker");
}

Pipeline::~Pipeline() { stop(); }

void Pipeline::start() {
  std::lock_guard lock(queue_mu_);
  if (!workers_.empty()) return;
  stopping_ = false;
  for (std::size_t i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void Pipeline::submit(ImageJob job) {
  {
    std::lock_guard lock(queue_mu_);
    if (stopping_) throw std::logic_error("pipeline is stopping");
    queue_.push_back({std::move(job), 0});
  }
  queue_cv_.notify_one();
}

void Pipeline::drain() {
  std::unique_lock lock(queue_mu_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && in_flight_ == 0; });
}

void Pipeline::stop() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
    workers.swap(workers_);
  }
  queue_cv_.notify_all();
  for (auto& t : workers) t.join();
}

void Pipeline::worker_loop() {
  for (;;) {
    Pending pending;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping with nothing left
      pending = std::move(queue_.front());
      queue_.pop_front();
      ++in_flight_;
    }
    ++pending.deliveries;
    bool requeue = false;
    try {
      process(pending.job);
    } catch (const std::exception& e) {
      if (pending.deliveries < options_.max_deliveries) {
        requeue = true;
      } else {
        dead_letter(pending.job.event_id, std::string("processing failed: ") + e.what());
      }
    }
    {
      std::lock_guard lock(queue_mu_);
      if (requeue) queue_.push_back(std::move(pending));
      --in_flight_;
    }
    if (requeue) queue_cv_.notify_one();
    idle_cv_.notify_all();
  }
}

void Pipeline::dead_letter(const std::string& event_id, std::string reason) {
  std::lock_guard lock(state_mu_);
  ++stats_.jobs;
  ++stats_.dead_letters;
  dead_letters_.push_back({event_id, std::move(reason)});
}

JobResult Pipeline::process(const ImageJob& job) {
  if (job.event_id.empty()) {
    dead_letter(job.event_id, "job has no event id");
    return JobResult::DeadLettered;
  }
  auto detected = detect_with_retry(job, backend_, options_.conf_threshold, options_.nms_threshold,
                                    options_.retry);
  if (!detected.event) {
    dead_letter(job.event_id, detected.dead_letter_reason.value_or("detection failed"));
    return JobResult::DeadLettered;
  }
  const DetectionEvent& event = *detected.event;
  const auto outcome = ledger_.apply_detection_event(event.payable(), options_.policy);

  std::lock_guard lock(state_mu_);
  switch (outcome.status) {
    case ledger::ApplyOutcome::Status::Duplicate:
      ++stats_.jobs;
      ++stats_.duplicates;
      return JobResult::Duplicate;
    case ledger::ApplyOutcome::Status::DeadLettered:
      ++stats_.jobs;
      ++stats_.dead_letters;
      dead_letters_.push_back({event.event_id, outcome.reason});
      return JobResult::DeadLettered;
    case ledger::ApplyOutcome::Status::Applied:
      break;
  }
  ++stats_.jobs;
  ++stats_.events;
  stats_.detections += event.detections.size();
  if (event.is_blank()) ++stats_.blanks;
  stats_.transfers += outcome.transfers.size();
  stats_.skipped_payouts += outcome.skipped.size();
  for (const auto& t : outcome.transfers) stats_.paid += t.amount;
  events_.emplace(event.event_id, event);
  return JobResult::Applied;
}

std::optional<DetectionEvent> Pipeline::find_event(const std::string& event_id) const {
  std::lock_guard lock(state_mu_);
  const auto it = events_.find(event_id);
  if (it == events_.end()) return std::nullopt;
  return it->second;
}

PipelineStats Pipeline::stats() const {
  std::lock_guard lock(state_mu_);
  return stats_;
}

std::vector<PipelineDeadLetter> Pipeline::dead_letters() const {
  std::lock_guard lock(state_mu_);
  return dead_letters_;
}

}  // namespace biopay::ingest
