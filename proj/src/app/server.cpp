#include "biopay/app/server.hpp"

#include <csignal>
#include <ostream>

#include <httplib.h>

#include "biopay/app/commands.hpp"
#include "biopay/app/reports.hpp"
#include "biopay/ingest/backend.hpp"

namespace biopay::app {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

json transfer_json(const ledger::TransferRecord& t) {
  return json{{"transfer_id", t.transfer_id},
              {"event_id", t.event_id},
              {"from", t.from},
              {"to", t.to},
              {"amount_pence", t.amount.value},
              {"amount", ledger::format_gbp(t.amount)},
              {"applied_at", util::format_rfc3339(t.applied_at)}};
}

json account_json(const ledger::Account& a) {
  return json{{"id", a.id},
              {"balance_pence", a.balance.value},
              {"balance", ledger::format_gbp(a.balance)},
              {"initial_credit_pence", a.initial_credit.value}};
}

std::optional<std::vector<ingest::RawDetection>> fixture_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("detections must be an array");
  std::vector<ingest::RawDetection> out;
  for (const auto& d : j) out.push_back(ingest::detection_from_json(d));
  return out;
}

constexpr std::size_t kRecentTransfers = 20;

}  // namespace

Service::Service(RunConfig config, util::Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      cameras_(ingest::CameraRegistry::numbered(config_.gateway.cameras)),
      images_(config_.gateway.image_dir.empty() ? ingest::ImageStore()
                                                : ingest::ImageStore(config_.gateway.image_dir)),
      audit_(clock_) {
  config_.validate();
  ledger_ = open_ledger(config_, clock_);
  backend_ = make_backend(config_);
  pipeline_ = std::make_unique<ingest::Pipeline>(*ledger_, *backend_, pipeline_options(config_));
}

Service::~Service() { stop(); }

std::string Service::accept(ingest::ImageJob job) {
  const auto id = job.event_id;
  {
    std::lock_guard lock(accepted_mu_);
    accepted_.insert(id);
  }
  pipeline_->submit(std::move(job));
  return id;
}

json Service::event_status(const std::string& event_id) const {
  if (auto e = pipeline_->find_event(event_id)) {
    auto j = ingest::event_to_json(*e);
    j["status"] = "processed";
    return j;
  }
  for (const auto& d : pipeline_->dead_letters()) {
    if (d.event_id == event_id) return json{{"event_id", event_id}, {"status", "dead_lettered"}, {"reason", d.reason}};
  }
  std::lock_guard lock(accepted_mu_);
  if (accepted_.contains(event_id)) return json{{"event_id", event_id}, {"status", "pending"}};
  return nullptr;
}

std::optional<std::string> Service::on_mail(const ingest::MailEnvelope& envelope) {
  const ingest::IntakeContext ctx{&cameras_, &images_, &audit_, clock_};
  try {
    auto job = ingest::extract_event(envelope, ctx);
    job.source = ingest::EventSource::Smtp;
    if (auto header = envelope.header("x-detections")) {
      job.fixture_detections = fixture_from_json(json::parse(*header));
    }
    accept(std::move(job));
    return std::nullopt;
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
}

void Service::install_routes() {
  auto& http = *http_;

  http.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("metadata") || !req.has_file("image")) {
      send_error(res, 400, "expected multipart form with 'metadata' and 'image' parts");
      return;
    }
    json meta;
    try {
      meta = json::parse(req.get_file_value("metadata").content);
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("metadata is not JSON: ") + e.what());
      return;
    }
    if (!meta.is_object() || !meta.contains("camera_id") || !meta["camera_id"].is_string()) {
      send_error(res, 400, "metadata needs a camera_id string");
      return;
    }
    std::optional<util::Timestamp> captured;
    if (meta.contains("captured_at")) {
      if (!meta["captured_at"].is_string() ||
          !(captured = util::parse_rfc3339(meta["captured_at"].get<std::string>()))) {
        send_error(res, 400, "captured_at must be an RFC 3339 time");
        return;
      }
    }
    std::optional<std::vector<ingest::RawDetection>> fixture;
    try {
      if (meta.contains("detections")) fixture = fixture_from_json(meta["detections"]);
    } catch (const std::exception& e) {
      send_error(res, 400, e.what());
      return;
    }
    const ingest::IntakeContext ctx{&cameras_, &images_, &audit_, clock_};
    try {
      auto job = ingest::extract_event(meta["camera_id"].get<std::string>(), captured,
                                       req.get_file_value("image").content,
                                       ingest::EventSource::Http, ctx);
      job.fixture_detections = std::move(fixture);
      const auto id = accept(std::move(job));
      send_json(res, 202, json{{"event_id", id}});
    } catch (const ingest::EventRejected& e) {
      send_error(res, 422, e.what());
    } catch (const std::logic_error& e) {
      send_error(res, 503, e.what());
    }
  });

  http.Get(R"(/v1/events/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto status = event_status(req.matches[1]);
    if (status.is_null()) {
      send_error(res, 404, "unknown event");
      return;
    }
    send_json(res, status["status"] == "pending" ? 202 : 200, status);
  });

  http.Get("/v1/accounts", [this](const httplib::Request&, httplib::Response& res) {
    const auto state = ledger_->state();
    json accounts = json::array();
    for (const auto& [id, a] : state.accounts) accounts.push_back(account_json(a));
    send_json(res, 200, json{{"accounts", accounts},
                             {"total_balance_pence", state.total_balance().value}});
  });

  http.Get(R"(/v1/accounts/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto state = ledger_->state();
    const auto it = state.accounts.find(id);
    if (it == state.accounts.end()) {
      send_error(res, 404, "unknown account");
      return;
    }
    json recent = json::array();
    for (auto t = state.journal.rbegin(); t != state.journal.rend() && recent.size() < kRecentTransfers; ++t) {
      if (t->from == id || t->to == id) recent.push_back(transfer_json(*t));
    }
    auto body = account_json(it->second);
    body["recent_transfers"] = recent;
    send_json(res, 200, body);
  });

  http.Get("/v1/ledger/journal", [this](const httplib::Request& req, httplib::Response& res) {
    util::Timestamp from{};
    util::Timestamp to = util::Timestamp::max();
    for (auto [key, slot] : {std::pair{"from", &from}, std::pair{"to", &to}}) {
      if (!req.has_param(key)) continue;
      const auto t = util::parse_rfc3339(req.get_param_value(key));
      if (!t) {
        send_error(res, 400, std::string(key) + " must be an RFC 3339 time");
        return;
      }
      *slot = *t;
    }
    if (to < from) {
      send_error(res, 400, "from must not be after to");
      return;
    }
    const auto state = ledger_->state();
    json records = json::array();
    for (const auto& t : state.journal) {
      if (t.applied_at >= from && t.applied_at < to) records.push_back(transfer_json(t));
    }
    send_json(res, 200, json{{"records", records}});
  });

  http.Post("/v1/ledger/replay-counts", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto table = ledger::replay_counts(parse_counts(req.body), config_.policy);
      if (req.get_header_value("Accept") == "text/csv") {
        res.status = 200;
        res.set_content(payments_csv(table), "text/csv");
        return;
      }
      json rows = json::array();
      for (const auto& r : table.rows) {
        rows.push_back({{"species", r.species},
                        {"detections", r.detections},
                        {"payment", ledger::format_amount(r.payment)}});
      }
      send_json(res, 200, json{{"rows", rows},
                               {"total_detections", table.total_detections},
                               {"total_payment", ledger::format_amount(table.total_payment)}});
    } catch (const std::exception& e) {
      send_error(res, 400, e.what());
    }
  });
}

void Service::start() {
  if (running_) return;
  pipeline_->start();

  ingest::SmtpLimits limits;
  limits.max_message_bytes = config_.gateway.max_message_bytes;
  smtp_ = std::make_unique<ingest::SmtpServer>(
      limits, [this](const ingest::MailEnvelope& e) { return on_mail(e); },
      config_.gateway.smtp_workers);
  smtp_port_ = smtp_->start(config_.gateway.smtp_port, config_.gateway.bind_address);

  http_ = std::make_unique<httplib::Server>();
  install_routes();
  if (config_.gateway.http_port == 0) {
    const int port = http_->bind_to_any_port(config_.gateway.bind_address);
    if (port < 0) throw std::runtime_error("HTTP bind failed");
    http_port_ = static_cast<std::uint16_t>(port);
  } else {
    if (!http_->bind_to_port(config_.gateway.bind_address, config_.gateway.http_port)) {
      smtp_->stop();
      throw std::runtime_error("HTTP port " + std::to_string(config_.gateway.http_port) + " is unavailable");
    }
    http_port_ = config_.gateway.http_port;
  }
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  running_ = true;
}

void Service::stop() {
  if (!running_) return;
  running_ = false;
  if (smtp_) smtp_->stop();
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  pipeline_->drain();
  pipeline_->stop();
  if (!config_.journal_path.empty()) ledger_->write_snapshot();
}

int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  // Worker threads inherit the mask, so only sigwait sees the signal.
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  try {
    Service service(config);
    service.start();
    out << "smtp listening on " << config.gateway.bind_address << ":" << service.smtp_port() << "\n";
    out << "http listening on " << config.gateway.bind_address << ":" << service.http_port() << "\n";
    out.flush();
    int sig = 0;
    sigwait(&signals, &sig);
    out << "signal " << sig << ", shutting down\n";
    service.stop();
    const auto stats = service.pipeline().stats();
    out << stats.events << " events, " << ledger::format_gbp(stats.paid) << " paid\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace biopay::app
