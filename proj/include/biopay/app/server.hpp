#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <json.hpp>

#include "biopay/app/config.hpp"
#include "biopay/ingest/event.hpp"
#include "biopay/ingest/pipeline.hpp"
#include "biopay/ingest/smtp.hpp"
#include "biopay/ledger/ledger.hpp"

namespace httplib {
class Server;
}

namespace biopay::app {

// SMTP + HTTP intake, the detector workers and the ledger in one process.
//
//   POST /v1/events               multipart: "metadata" (JSON) + "image"
//   GET  /v1/events/{id}
//   GET  /v1/accounts
//   GET  /v1/accounts/{id}
//   GET  /v1/ledger/journal?from=&to=
//   POST /v1/ledger/replay-counts
//
// With the fixture backend, a "detections" array in the metadata (or an
// X-Detections header on mail) is what the detector reports.
class Service {
 public:
  explicit Service(RunConfig config, util::Clock clock = util::system_now);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Ports of 0 in the config pick free ones.
  void start();
  // Stops intake, drains queued jobs, then snapshots the journal if any.
  void stop();

  std::uint16_t smtp_port() const { return smtp_port_; }
  std::uint16_t http_port() const { return http_port_; }

  ledger::Ledger& ledger() { return *ledger_; }
  ingest::Pipeline& pipeline() { return *pipeline_; }
  const ingest::AuditLog& audit() const { return audit_; }

  // Queue a job; returns its event id.
  std::string accept(ingest::ImageJob job);
  nlohmann::json event_status(const std::string& event_id) const;

 private:
  void install_routes();
  std::optional<std::string> on_mail(const ingest::MailEnvelope& envelope);

  RunConfig config_;
  util::Clock clock_;
  ingest::CameraRegistry cameras_;
  ingest::ImageStore images_;
  ingest::AuditLog audit_;
  std::unique_ptr<ledger::Ledger> ledger_;
  std::unique_ptr<ingest::DetectorBackend> backend_;
  std::unique_ptr<ingest::Pipeline> pipeline_;
  std::unique_ptr<ingest::SmtpServer> smtp_;
  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::uint16_t smtp_port_ = 0;
  std::uint16_t http_port_ = 0;
  bool running_ = false;

  mutable std::mutex accepted_mu_;
  std::set<std::string> accepted_;
};

// Runs until SIGINT or SIGTERM.
int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace biopay::app
