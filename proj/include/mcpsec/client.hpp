#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcpsec/protocol.hpp"
#include "mcpsec/transport.hpp"

namespace mcpsec::protocol {

struct SessionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CallResult {
  std::string text;
  bool is_error = false;
  int rpc_error_code = 0;  // nonzero when the server answered with an error response
};

// Harness-side MCP session. Performs the initialize handshake, lists tools
// exactly as served (descriptions byte-identical), and calls tools. Every
// wire line crosses through wire_log so transcripts can be compared across
// transports byte-for-byte.
class ClientSession {
 public:
  explicit ClientSession(Transport& transport, std::string client_name = "mcpsec-harness")
      : transport_(transport), client_name_(std::move(client_name)) {}

  json initialize() {
    json params{{"protocolVersion", kProtocolVersion},
                {"capabilities", json::object()},
                {"clientInfo", json{{"name", client_name_}, {"version", kHarnessVersion}}}};
    RpcMessage resp = roundtrip(RpcMessage::request(next_id_++, "initialize", params));
    if (resp.error) throw SessionError("initialize failed: " + resp.error->message);
    send(RpcMessage::notification("notifications/initialized"));
    initialized_ = true;
    server_name_ = resp.result->contains("serverInfo")
                       ? (*resp.result)["serverInfo"].value("name", std::string{})
                       : std::string{};
    return *resp.result;
  }

  std::vector<ToolDescriptor> list_tools() {
    require_initialized();
    RpcMessage resp = roundtrip(RpcMessage::request(next_id_++, "tools/list"));
    if (resp.error) throw SessionError("tools/list failed: " + resp.error->message);
    std::vector<ToolDescriptor> out;
    for (const auto& t : (*resp.result)["tools"]) out.push_back(ToolDescriptor::from_wire(t));
    return out;
  }

  CallResult call_tool(const std::string& name, const json& args = json::object()) {
    require_initialized();
    json params{{"name", name}, {"arguments", args}};
    RpcMessage resp = roundtrip(RpcMessage::request(next_id_++, "tools/call", params));
    CallResult r;
    if (resp.error) {
      r.is_error = true;
      r.rpc_error_code = resp.error->code;
      r.text = resp.error->message;
      return r;
    }
    r.is_error = resp.result->value("isError", false);
    if (resp.result->contains("content"))
      for (const auto& part : (*resp.result)["content"])
        if (part.value("type", std::string{}) == "text") r.text += part.value("text", std::string{});
    return r;
  }

  const std::string& server_name() const { return server_name_; }

  // ('C', line) for lines sent, ('S', line) for lines received.
  const std::vector<std::pair<char, std::string>>& wire_log() const { return wire_log_; }

 private:
  void require_initialized() const {
    if (!initialized_) throw UsageError("session used before initialize handshake");
  }

  void send(const RpcMessage& m) {
    std::string line = encode_frame(m);
    wire_log_.emplace_back('C', line);
    transport_.send_line(line);
  }

  RpcMessage roundtrip(const RpcMessage& m) {
    send(m);
    auto line = transport_.recv_line();
    if (!line) throw SessionError("transport closed mid-call");
    wire_log_.emplace_back('S', *line);
    RpcMessage resp = decode_frame(*line);
    if (resp.kind != MsgKind::kResponse || resp.id != m.id)
      throw SessionError("out-of-order or mismatched response");
    return resp;
  }

  Transport& transport_;
  std::string client_name_;
  std::string server_name_;
  std::vector<std::pair<char, std::string>> wire_log_;
  int next_id_ = 1;
  bool initialized_ = false;
};

// Spawns a subprocess speaking the stdio framing on its stdin/stdout.
// Used for stdio-mode trials, where the server is this harness binary
// re-invoked with `serve`.
class SubprocessTransport : public Transport {
 public:
  explicit SubprocessTransport(const std::vector<std::string>& argv) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw SessionError("pipe failed: " + std::string(std::strerror(errno)));
    pid_ = fork();
    if (pid_ < 0) throw SessionError("fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> cargv;
      cargv.reserve(argv.size() + 1);
      for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
      cargv.push_back(nullptr);
      execvp(cargv[0], cargv.data());
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ~SubprocessTransport() override { close(); }

  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void send_line(const std::string& line) override {
    std::string payload = line;
    if (payload.empty() || payload.back() != '\n') payload += '\n';
    std::size_t off = 0;
    while (off < payload.size()) {
      ssize_t n = ::write(write_fd_, payload.data() + off, payload.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SessionError("write to server failed");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> recv_line() override {
    std::string line;
    char c;
    while (true) {
      ssize_t n = ::read(read_fd_, &c, 1);
      if (n == 0) return line.empty() ? std::nullopt : std::optional<std::string>(line);
      if (n < 0) {
        if (errno == EINTR) continue;
        return std::nullopt;
      }
      if (c == '\n') return line;
      line.push_back(c);
    }
  }

  void close() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
      exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      pid_ = -1;
    }
  }

  // Valid after close(); -1 if the child did not exit cleanly.
  int exit_code() const { return exit_code_; }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  int exit_code_ = -1;
};

}  // namespace mcpsec::protocol
