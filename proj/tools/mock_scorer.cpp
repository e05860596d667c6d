// Test scorer speaking the newline-delimited JSON scoring protocol on
// stdin/stdout or a TCP port. Misbehaviour flags exist for client tests.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "decsum/scoring.hpp"

namespace {

struct Behaviour {
  std::string mode = "lexicon";
  std::optional<std::string> lexicon_path;
  bool drop_one = false;
  bool garbage = false;
  bool wrong_id = false;
  int sleep_ms = 0;
  std::optional<std::string> sleep_once_file;
};

class Responder {
 public:
  explicit Responder(const Behaviour& b)
      : b_(b),
        lexicon_(b.lexicon_path ? decsum::LexiconModel::load(*b.lexicon_path) : decsum::LexiconModel::fixture()) {}

  std::string respond(const std::string& line) {
    maybe_sleep();
    if (b_.garbage) return "this is not json";
    const auto req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object() || !req.contains("texts") || !req["texts"].is_array()) {
      nlohmann::json err = {{"id", nullptr}, {"error", "malformed request"}};
      if (!req.is_discarded() && req.is_object() && req.contains("id")) err["id"] = req["id"];
      return err.dump();
    }
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& t : req["texts"]) {
      const auto s = t.is_string() ? t.get<std::string>() : std::string{};
      if (b_.mode == "length") scores.push_back(static_cast<double>(s.size()));
      else scores.push_back(lexicon_.score(s));
    }
    if (b_.drop_one && !scores.empty()) scores.erase(scores.size() - 1);
    nlohmann::json id = req.value("id", nlohmann::json(nullptr));
    if (b_.wrong_id && id.is_number_unsigned()) id = id.get<std::uint64_t>() + 1000;
    return nlohmann::json{{"id", id}, {"scores", scores}}.dump();
  }

 private:
  void maybe_sleep() {
    if (b_.sleep_once_file) {
      if (!std::filesystem::exists(*b_.sleep_once_file)) {
        std::ofstream(*b_.sleep_once_file) << "slept\n";
        std::this_thread::sleep_for(std::chrono::milliseconds(b_.sleep_ms));
      }
      return;
    }
    if (b_.sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(b_.sleep_ms));
  }

  Behaviour b_;
  decsum::LexiconModel lexicon_;
};

void serve_stdio(Responder& r) {
  std::string line;
  while (std::getline(std::cin, line)) {
    std::cout << r.respond(line) << '\n' << std::flush;
  }
}

int serve_tcp(Responder& r, int port, const std::optional<std::string>& port_file) {
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 4) != 0) {
    std::perror("mock_scorer: bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  if (port_file) {
    const std::string tmp = *port_file + ".tmp";
    std::ofstream(tmp) << ntohs(addr.sin_port) << '\n';
    std::filesystem::rename(tmp, *port_file);
  }
  for (;;) {
    const int fd = ::accept(srv, nullptr, nullptr);
    if (fd < 0) continue;
    std::string buf;
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        const std::string out = r.respond(buf.substr(0, nl)) + "\n";
        buf.erase(0, nl + 1);
        if (::send(fd, out.data(), out.size(), MSG_NOSIGNAL) < 0) break;
      }
    }
    ::close(fd);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock scorer for the scoring wire protocol"};
  Behaviour b;
  int port = -1;
  std::optional<std::string> port_file;
  app.add_option("--mode", b.mode, "lexicon|length")->check(CLI::IsMember({"lexicon", "length"}));
  app.add_option("--lexicon", b.lexicon_path, "JSON word->value map");
  app.add_flag("--drop-one", b.drop_one, "Return one score fewer than requested");
  app.add_flag("--garbage", b.garbage, "Answer with a non-JSON line");
  app.add_flag("--wrong-id", b.wrong_id, "Answer with a mismatched id");
  app.add_option("--sleep-ms", b.sleep_ms, "Delay before each response");
  app.add_option("--sleep-once-file", b.sleep_once_file, "Sleep only if this marker file does not exist yet");
  app.add_option("--port", port, "Serve TCP on 127.0.0.1:PORT (0 picks a free port)");
  app.add_option("--port-file", port_file, "Write the bound port here");
  CLI11_PARSE(app, argc, argv);

  Responder r(b);
  if (port >= 0) return serve_tcp(r, port, port_file);
  serve_stdio(r);
  return 0;
}
