#pragma once

// Client for external scorers speaking newline-delimited JSON:
//   request  {"id": <u64>, "texts": [<string>...]}
//   response {"id": <u64>, "scores": [<f64>...]}
// over a child process's stdin/stdout or a TCP stream.

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "decsum/errors.hpp"
#include "decsum/scoring.hpp"

extern char** environ;

namespace decsum {

/// A bidirectional line stream that can be torn down and reopened.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void open() = 0;
  virtual void close() = 0;
  virtual void write_line(std::string_view line) = 0;
  /// nullopt on timeout.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

namespace detail {

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

/// Buffered line reader over a file descriptor with a poll() deadline.
class FdLineReader {
 public:
  void reset() { buf_.clear(); }

  std::optional<std::string> read_line(int fd, std::chrono::milliseconds timeout, const std::string& who) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(who + ": poll failed: " + std::strerror(errno));
      }
      if (rc == 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(who + ": read failed: " + std::strerror(errno));
      }
      if (n == 0) throw TransportError(who + ": scorer closed the stream");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buf_;
};

inline void write_all(int fd, std::string_view data, bool socket, const std::string& who) {
  while (!data.empty()) {
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL) : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(who + ": write failed: " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace detail

/// Runs `/bin/sh -c <command>` and talks over its standard streams.
class ChildProcessTransport final : public LineTransport {
 public:
  explicit ChildProcessTransport(std::string command) : command_(std::move(command)) { detail::ignore_sigpipe(); }
  ~ChildProcessTransport() override { close(); }

  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  void open() override {
    close();
    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw TransportError(describe() + ": pipe failed");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw TransportError(describe() + ": pipe failed");
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, out_pipe[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", dash_c = "-c", cmd = command_;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &fa, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      pid_ = -1;
      throw TransportError(describe() + ": spawn failed: " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    reader_.reset();
  }

  void close() override {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
      ::kill(pid_, SIGTERM);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  void write_line(std::string_view line) override {
    if (to_child_ < 0) open();
    std::string data(line);
    data.push_back('\n');
    detail::write_all(to_child_, data, false, describe());
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    if (from_child_ < 0) throw TransportError(describe() + ": not connected");
    return reader_.read_line(from_child_, timeout, describe());
  }

  std::string describe() const override { return "exec:" + command_; }

 private:
  std::string command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  detail::FdLineReader reader_;
};

class TcpTransport final : public LineTransport {
 public:
  TcpTransport(std::string host, std::string port) : host_(std::move(host)), port_(std::move(port)) {}
  ~TcpTransport() override { close(); }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void open() override {
    close();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res); rc != 0) {
      throw TransportError(describe() + ": cannot resolve: " + ::gai_strerror(rc));
    }
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw TransportError(describe() + ": connection refused");
    reader_.reset();
  }

  void close() override {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  void write_line(std::string_view line) override {
    if (fd_ < 0) open();
    std::string data(line);
    data.push_back('\n');
    detail::write_all(fd_, data, true, describe());
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    if (fd_ < 0) throw TransportError(describe() + ": not connected");
    return reader_.read_line(fd_, timeout, describe());
  }

  std::string describe() const override { return "tcp:" + host_ + ":" + port_; }

 private:
  std::string host_, port_;
  int fd_ = -1;
  detail::FdLineReader reader_;
};

/// Parses "exec:<command>" or "tcp:<host>:<port>".
inline std::unique_ptr<LineTransport> make_transport(std::string_view endpoint) {
  if (endpoint.starts_with("exec:")) {
    auto cmd = std::string(endpoint.substr(5));
    if (cmd.empty()) throw ConfigError("empty scorer command in '" + std::string(endpoint) + "'");
    return std::make_unique<ChildProcessTransport>(std::move(cmd));
  }
  if (endpoint.starts_with("tcp:")) {
    const auto rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
      throw ConfigError("expected tcp:<host>:<port>, got '" + std::string(endpoint) + "'");
    }
    return std::make_unique<TcpTransport>(std::string(rest.substr(0, colon)), std::string(rest.substr(colon + 1)));
  }
  throw ConfigError("unknown scorer endpoint '" + std::string(endpoint) + "' (expected exec:CMD or tcp:HOST:PORT)");
}

/// DecisionModel backed by an external scorer. Requests are serialized over
/// one stream, at most `max_batch` texts each, in order.
class ExternalScorer final : public DecisionModel {
 public:
  static constexpr std::size_t kMaxBatch = 64;

  explicit ExternalScorer(std::unique_ptr<LineTransport> transport,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30), std::size_t max_batch = kMaxBatch)
      : transport_(std::move(transport)), timeout_(timeout), max_batch_(max_batch == 0 ? 1 : max_batch) {}

  explicit ExternalScorer(std::string_view endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : ExternalScorer(make_transport(endpoint), timeout) {}

  double score(std::string_view txt) const override {
    const std::string one(txt);
    return score_batch(std::span<const std::string>(&one, 1)).front();
  }

  std::vector<double> score_batch(std::span<const std::string> texts) const override {
    std::lock_guard lock(mu_);
    std::vector<double> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += max_batch_) {
      const auto chunk = texts.subspan(i, std::min(max_batch_, texts.size() - i));
      auto scores = request(chunk);
      out.insert(out.end(), scores.begin(), scores.end());
    }
    return out;
  }

  std::string model_id() const override { return transport_->describe(); }

  std::uint64_t requests_sent() const {
    std::lock_guard lock(mu_);
    return next_id_ - 1;
  }

 private:
  std::vector<double> request(std::span<const std::string> texts) const {
    const std::uint64_t id = next_id_++;
    nlohmann::json req = {{"id", id}, {"texts", nlohmann::json::array()}};
    for (const auto& t : texts) req["texts"].push_back(t);
    const std::string line = req.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

    for (int attempt = 0; attempt < 2; ++attempt) {
      if (attempt > 0 || !opened_) {
        transport_->open();
        opened_ = true;
      }
      transport_->write_line(line);
      if (auto resp = transport_->read_line(timeout_)) return parse_response(*resp, id, texts.size());
    }
    throw TransportError(transport_->describe() + ": timed out after retry (request id " + std::to_string(id) + ")");
  }

  static std::vector<double> parse_response(const std::string& line, std::uint64_t id, std::size_t arity) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProtocolError("malformed scorer response", line);
    if (j.contains("error")) throw ProtocolError("scorer reported an error", line);
    if (!j.contains("id") || !j["id"].is_number_unsigned() || j["id"].get<std::uint64_t>() != id) {
      throw ProtocolError("scorer response id does not match request id " + std::to_string(id), line);
    }
    if (!j.contains("scores") || !j["scores"].is_array()) throw ProtocolError("scorer response has no scores array", line);
    const auto& s = j["scores"];
    if (s.size() != arity) {
      throw ProtocolError("scorer returned " + std::to_string(s.size()) + " scores for " + std::to_string(arity) + " texts",
                          line);
    }
    std::vector<double> out;
    out.reserve(arity);
    for (const auto& v : s) {
      if (!v.is_number()) throw ProtocolError("non-numeric score", line);
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ProtocolError("non-finite score", line);
      out.push_back(d);
    }
    return out;
  }

  std::unique_ptr<LineTransport> transport_;
  std::chrono::milliseconds timeout_;
  std::size_t max_batch_;
  mutable std::mutex mu_;
  mutable std::uint64_t next_id_ = 1;
  mutable bool opened_ = false;
};

}  // namespace decsum
