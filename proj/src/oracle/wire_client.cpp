#include <netdb.h>
#include <openssl/evp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "core/error.hpp"
#include "oracle/oracle.hpp"

extern char** environ;

namespace facebb {

namespace {

using json = nlohmann::json;

[[noreturn]] void transport_error(const std::string& what) {
  fail(ErrorCode::Oracle, "oracle transport: " + what);
}

// Line framing over a connected stream socket. Sockets (not pipes) are used
// for child processes too, so writes can pass MSG_NOSIGNAL.
class SocketTransport : public Transport {
 public:
  explicit SocketTransport(int fd) : fd_(fd) {}
  ~SocketTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void write_line(const std::string& line) override {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) transport_error("timed out waiting for reply");
      pollfd pfd{fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        transport_error(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) transport_error("timed out waiting for reply");
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_error(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) transport_error("connection closed by oracle");
      pending_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  int fd_;

 private:
  std::string pending_;
};

class ProcessTransport final : public SocketTransport {
 public:
  ProcessTransport(int fd, pid_t pid) : SocketTransport(fd), pid_(pid) {}
  ~ProcessTransport() override {
    ::shutdown(fd_, SHUT_RDWR);
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    // The child leads its own process group; signal the whole group so
    // anything the shell started goes too.
    ::kill(-pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

std::unique_ptr<Transport> open_tcp(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == hostport.size())
    fail(ErrorCode::InvalidArgument, "tcp endpoint must be tcp://host:port");
  const std::string host = hostport.substr(0, colon);
  const std::string port = hostport.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    transport_error("cannot resolve " + hostport + ": " + ::gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);

  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0)
      return std::make_unique<SocketTransport>(fd);
    ::close(fd);
  }
  transport_error("cannot connect to " + hostport);
}

std::unique_ptr<Transport> open_process(const std::string& command) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    transport_error(std::string("socketpair failed: ") + std::strerror(errno));

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr,
                               const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    transport_error("cannot spawn '" + command + "': " + std::strerror(rc));
  }
  return std::make_unique<ProcessTransport>(sv[0], pid);
}

std::string base64_encode(const unsigned char* bytes, std::size_t len) {
  std::string out(4 * ((len + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes,
                                static_cast<int>(len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

json parse_reply(const std::string& line) {
  json reply = json::parse(line, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("type") ||
      !reply["type"].is_string())
    fail(ErrorCode::Oracle, "malformed oracle reply: " + line.substr(0, 200));
  return reply;
}

}  // namespace

std::unique_ptr<Transport> open_transport(const std::string& endpoint) {
  if (endpoint.rfind("tcp://", 0) == 0) return open_tcp(endpoint.substr(6));
  if (endpoint.rfind("stdio:", 0) == 0) {
    const std::string cmd = endpoint.substr(6);
    if (cmd.empty()) fail(ErrorCode::InvalidArgument, "stdio endpoint needs a command");
    return open_process(cmd);
  }
  fail(ErrorCode::InvalidArgument,
       "unknown oracle endpoint '" + endpoint + "' (expected tcp://host:port or stdio:<cmd>)");
}

std::string encode_embed_request(std::uint64_t id, const Image& img) {
  auto data = img.data();
  std::vector<unsigned char> bytes(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = static_cast<float>(data[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int k = 0; k < 4; ++k) bytes[i * 4 + k] = static_cast<unsigned char>(bits >> (8 * k));
  }
  json req = {{"type", "embed"},
              {"id", id},
              {"image",
               {{"h", img.height()},
                {"w", img.width()},
                {"c", img.channels()},
                {"data_b64", base64_encode(bytes.data(), bytes.size())}}}};
  return req.dump();
}

WireOracle::WireOracle(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  transport_->write_line(R"({"type":"hello"})");
  const json reply = parse_reply(transport_->read_line(timeout_));
  try {
    if (reply.at("type") != "hello") fail(ErrorCode::Oracle, "expected hello reply");
    embed_dim_ = reply.at("embed_dim").get<int>();
    const auto& in = reply.at("input");
    input_ = {in.at("h").get<int>(), in.at("w").get<int>(), in.at("c").get<int>()};
  } catch (const json::exception& e) {
    fail(ErrorCode::Oracle, std::string("malformed hello reply: ") + e.what());
  }
  if (embed_dim_ <= 0 || input_.height <= 0 || input_.width <= 0 ||
      (input_.channels != 1 && input_.channels != 3))
    fail(ErrorCode::Oracle, "hello reply declares invalid dimensions");
}

std::unique_ptr<WireOracle> WireOracle::connect(const std::string& endpoint,
                                                std::chrono::milliseconds timeout) {
  return std::make_unique<WireOracle>(open_transport(endpoint), timeout);
}

Embedding WireOracle::compute(const Image& img) {
  const std::uint64_t id = next_id_++;
  transport_->write_line(encode_embed_request(id, img));
  const json reply = parse_reply(transport_->read_line(timeout_));
  const std::string type = reply["type"].get<std::string>();

  const auto reply_id = reply.find("id");
  if (reply_id == reply.end() || !reply_id->is_number_unsigned() ||
      reply_id->get<std::uint64_t>() != id)
    fail(ErrorCode::Oracle, "oracle reply id does not match request " + std::to_string(id));

  if (type == "error") {
    const auto msg = reply.value("message", std::string("(no message)"));
    fail(ErrorCode::Oracle, "oracle error for request " + std::to_string(id) + ": " + msg);
  }
  if (type != "embedding") fail(ErrorCode::Oracle, "unexpected oracle reply type '" + type + "'");

  const auto values = reply.find("values");
  if (values == reply.end() || !values->is_array())
    fail(ErrorCode::Oracle, "embedding reply without values array");
  std::vector<double> v;
  v.reserve(values->size());
  for (const auto& x : *values) {
    if (!x.is_number()) fail(ErrorCode::Oracle, "non-numeric embedding value");
    v.push_back(x.get<double>());
  }
  if (static_cast<int>(v.size()) != embed_dim_)
    fail(ErrorCode::Oracle, "embedding has " + std::to_string(v.size()) + " values, expected " +
                                std::to_string(embed_dim_));
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-4)
    fail(ErrorCode::Oracle, "oracle returned a non-normalized embedding");
  return Embedding::normalized(std::move(v));
}

}  // namespace facebb
