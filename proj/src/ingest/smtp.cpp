#include "biopay/ingest/smtp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <system_error>

namespace biopay::ingest {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

}  // namespace

std::optional<std::string> parse_path_argument(std::string_view args, std::string_view keyword) {
  args = trim(args);
  if (args.size() < keyword.size() || upper(args.substr(0, keyword.size())) != keyword) {
    return std::nullopt;
  }
  args = trim(args.substr(keyword.size()));
  if (args.empty() || args.front() != '<') return std::nullopt;
  const auto close = args.find('>');
  if (close == std::string_view::npos) return std::nullopt;
  std::string path(args.substr(1, close - 1));
  for (char c : path) {
    if (std::iscntrl(static_cast<unsigned char>(c)) || c == ' ') return std::nullopt;
  }
  return path;
}

SmtpSession::SmtpSession(SmtpLimits limits, MessageHandler handler)
    : limits_(std::move(limits)), handler_(std::move(handler)) {}

std::string SmtpSession::greeting() const {
  return "220 " + limits_.hostname + " ESMTP ready\r\n";
}

std::string SmtpSession::error(std::string reply) {
  if (++errors_ >= limits_.max_errors) {
    state_ = State::Closed;
    return reply + "421 4.7.0 too many errors, closing connection\r\n";
  }
  return reply;
}

std::string SmtpSession::feed(std::string_view bytes) {
  std::string replies;
  for (char c : bytes) {
    if (state_ == State::Closed) break;
    if (c != '\n') {
      // DATA lines are bounded by the message cap instead.
      const std::size_t cap = state_ == State::Data ? limits_.max_message_bytes + 2
                                                    : limits_.max_command_line;
      if (buffer_.size() >= cap) {
        if (!discarding_long_line_ && state_ != State::Data) {
          replies += error("500 5.5.2 line too long\r\n");
        }
        discarding_long_line_ = true;
        if (state_ == State::Data) data_oversized_ = true;
        continue;
      }
      buffer_.push_back(c);
      continue;
    }
    std::string line = std::move(buffer_);
    buffer_.clear();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (discarding_long_line_) {
      discarding_long_line_ = false;
      if (state_ != State::Data) continue;
    }
    replies += on_line(line);
  }
  return replies;
}

std::string SmtpSession::on_line(std::string_view line) {
  if (state_ == State::Data) return on_data_line(line);
  return on_command(line);
}

std::string SmtpSession::on_command(std::string_view line) {
  const auto space = line.find(' ');
  const std::string verb = upper(line.substr(0, space));
  const std::string_view args = space == std::string_view::npos ? "" : line.substr(space + 1);

  if (verb == "QUIT") {
    state_ = State::Closed;
    return "221 2.0.0 " + limits_.hostname + " closing connection\r\n";
  }
  if (verb == "NOOP") return "250 2.0.0 OK\r\n";
  if (verb == "HELO" || verb == "EHLO") {
    if (trim(args).empty()) return error("501 5.5.4 " + verb + " requires a domain\r\n");
    if (state_ == State::Done) return error("503 5.5.1 one message per session\r\n");
    state_ = State::Ready;
    sender_.clear();
    recipient_.clear();
    if (verb == "EHLO") {
      return "250-" + limits_.hostname + "\r\n250 SIZE " +
             std::to_string(limits_.max_message_bytes) + "\r\n";
    }
    return "250 " + limits_.hostname + "\r\n";
  }
  if (verb == "RSET") {
    if (state_ == State::Mail || state_ == State::Rcpt) state_ = State::Ready;
    sender_.clear();
    recipient_.clear();
    return "250 2.0.0 OK\r\n";
  }
  if (verb == "MAIL") {
    if (state_ == State::Done) return error("503 5.5.1 one message per session\r\n");
    if (state_ != State::Ready) return error("503 5.5.1 send HELO/EHLO first\r\n");
    auto path = parse_path_argument(args, "FROM:");
    if (!path) return error("501 5.5.4 syntax: MAIL FROM:<address>\r\n");
    sender_ = std::move(*path);
    state_ = State::Mail;
    return "250 2.1.0 sender OK\r\n";
  }
  if (verb == "RCPT") {
    if (state_ == State::Rcpt) return error("452 4.5.3 too many recipients\r\n");
    if (state_ != State::Mail) return error("503 5.5.1 need MAIL before RCPT\r\n");
    auto path = parse_path_argument(args, "TO:");
    if (!path || path->empty()) return error("501 5.5.4 syntax: RCPT TO:<address>\r\n");
    recipient_ = std::move(*path);
    state_ = State::Rcpt;
    return "250 2.1.5 recipient OK\r\n";
  }
  if (verb == "DATA") {
    if (state_ == State::Mail) return error("503 5.5.1 need RCPT before DATA\r\n");
    if (state_ != State::Rcpt) return error("503 5.5.1 need MAIL before DATA\r\n");
    state_ = State::Data;
    data_.clear();
    data_oversized_ = false;
    return "354 end data with <CR><LF>.<CR><LF>\r\n";
  }
  if (verb.empty()) return error("500 5.5.2 empty command\r\n");
  return error("500 5.5.1 command not recognized\r\n");
}

std::string SmtpSession::on_data_line(std::string_view line) {
  if (line == ".") return finish_data();
  if (line.starts_with(".")) line.remove_prefix(1);
  if (data_oversized_) return {};
  if (data_.size() + line.size() + 2 > limits_.max_message_bytes) {
    data_oversized_ = true;
    data_.clear();
    data_.shrink_to_fit();
    return {};
  }
  data_.append(line);
  data_.append("\r\n");
  return {};
}

std::string SmtpSession::finish_data() {
  if (data_oversized_) {
    state_ = State::Closed;
    data_.clear();
    return "552 5.3.4 message exceeds " + std::to_string(limits_.max_message_bytes) +
           " bytes\r\n";
  }
  MailEnvelope env = parse_mail_message(data_);
  env.sender = sender_;
  env.recipient = recipient_;
  data_.clear();
  if (handler_) {
    std::optional<std::string> refusal;
    try {
      refusal = handler_(env);
    } catch (const std::exception& e) {
      refusal = e.what();
    }
    if (refusal) {
      state_ = State::Ready;
      sender_.clear();
      recipient_.clear();
      std::string text = *refusal;
      std::replace(text.begin(), text.end(), '\r', ' ');
      std::replace(text.begin(), text.end(), '\n', ' ');
      return error("554 5.6.0 " + text + "\r\n");
    }
  }
  envelope_ = std::move(env);
  state_ = State::Done;
  return "250 2.0.0 message accepted\r\n";
}

SmtpServer::SmtpServer(SmtpLimits limits, MessageHandler handler, std::size_t workers,
                       int idle_timeout_seconds)
    : limits_(std::move(limits)),
      handler_(std::move(handler)),
      worker_count_(std::max<std::size_t>(1, workers)),
      idle_timeout_seconds_(idle_timeout_seconds) {}

SmtpServer::~SmtpServer() { stop(); }

std::uint16_t SmtpServer::start(std::uint16_t port, const std::string& bind_address) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::system_error(EINVAL, std::generic_category(), "bad bind address");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 128) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::system_error(err, std::generic_category(), "SMTP bind");
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);

  running_ = true;
  for (std::size_t i = 0; i < worker_count_; ++i) workers_.emplace_back([this] { worker_loop(); });
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void SmtpServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();
  cv_.notify_all();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  workers_.clear();
  std::lock_guard lock(mu_);
  for (int fd : pending_) ::close(fd);
  pending_.clear();
}

SmtpServerStats SmtpServer::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void SmtpServer::accept_loop() {
  while (running_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      if (!running_) return;
      continue;
    }
    {
      std::lock_guard lock(mu_);
      pending_.push_back(fd);
    }
    cv_.notify_one();
  }
}

void SmtpServer::worker_loop() {
  for (;;) {
    int fd;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return !pending_.empty() || !running_; });
      if (pending_.empty()) return;
      fd = pending_.front();
      pending_.pop_front();
    }
    try {
      serve(fd);
    } catch (...) {
      std::lock_guard lock(mu_);
      ++stats_.session_errors;
    }
    ::close(fd);
  }
}

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

void SmtpServer::serve(int fd) {
  timeval tv{idle_timeout_seconds_, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  SmtpSession session(limits_, handler_);
  {
    std::lock_guard lock(mu_);
    ++stats_.sessions;
  }
  if (!send_all(fd, session.greeting())) return;
  char buf[4096];
  while (running_ && !session.closed()) {
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    const std::string reply = session.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    if (!reply.empty() && !send_all(fd, reply)) break;
  }
  if (session.envelope()) {
    std::lock_guard lock(mu_);
    ++stats_.messages;
  }
}

}  // namespace biopay::ingest
