#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "biopay/ingest/mime.hpp"

namespace biopay::ingest {

struct SmtpLimits {
  std::string hostname = "biopay.local";
  std::size_t max_message_bytes = 10u << 20;
  std::size_t max_command_line = 512;
  int max_errors = 10;
};

// Returns an error text to refuse the message (sent as 554), or nullopt to
// accept it.
using MessageHandler = std::function<std::optional<std::string>(const MailEnvelope&)>;

// Server side of one SMTP conversation, driven by raw bytes. Supports
// HELO/EHLO, MAIL FROM, RCPT TO (one recipient), DATA, RSET, NOOP and QUIT,
// and accepts a single message per session. Never throws on input.
class SmtpSession {
 public:
  explicit SmtpSession(SmtpLimits limits = {}, MessageHandler handler = {});

  std::string greeting() const;
  // Consumes bytes and returns the replies they provoke (possibly empty).
  std::string feed(std::string_view bytes);
  bool closed() const { return state_ == State::Closed; }

  // The accepted message, once DATA has completed successfully.
  const std::optional<MailEnvelope>& envelope() const { return envelope_; }

 private:
  enum class State { Greeted, Ready, Mail, Rcpt, Data, Done, Closed };

  std::string on_line(std::string_view line);
  std::string on_command(std::string_view line);
  std::string on_data_line(std::string_view line);
  std::string finish_data();
  std::string error(std::string reply);

  SmtpLimits limits_;
  MessageHandler handler_;
  State state_ = State::Greeted;
  std::string buffer_;
  bool discarding_long_line_ = false;
  std::string sender_, recipient_;
  std::string data_;
  bool data_oversized_ = false;
  int errors_ = 0;
  std::optional<MailEnvelope> envelope_;
};

// Parses "MAIL FROM:<a@b>" style arguments; nullopt when malformed.
std::optional<std::string> parse_path_argument(std::string_view args, std::string_view keyword);

struct SmtpServerStats {
  std::uint64_t sessions = 0;
  std::uint64_t messages = 0;
  std::uint64_t session_errors = 0;  // exceptions caught inside a session
};

// TCP listener with a fixed pool of session workers.
class SmtpServer {
 public:
  SmtpServer(SmtpLimits limits, MessageHandler handler, std::size_t workers = 4,
             int idle_timeout_seconds = 30);
  ~SmtpServer();
  SmtpServer(const SmtpServer&) = delete;
  SmtpServer& operator=(const SmtpServer&) = delete;

  // Binds 127.0.0.1:port (0 picks a free port) and starts accepting.
  // Returns the bound port. Throws std::system_error if binding fails.
  std::uint16_t start(std::uint16_t port, const std::string& bind_address = "127.0.0.1");
  void stop();
  bool running() const { return running_.load(); }
  SmtpServerStats stats() const;

 private:
  void accept_loop();
  void worker_loop();
  void serve(int fd);

  SmtpLimits limits_;
  MessageHandler handler_;
  std::size_t worker_count_;
  int idle_timeout_seconds_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::vector<std::thread> workers_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<int> pending_;
  SmtpServerStats stats_;
};

}  // namespace biopay::ingest
