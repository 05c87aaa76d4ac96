#pragma once

#include <deque>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "mcpsec/protocol.hpp"

namespace mcpsec::protocol {

// A bidirectional line channel. One JSON-RPC object per line, UTF-8,
// '\n' terminator, no length headers.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  virtual std::optional<std::string> recv_line() = 0;  // nullopt at end-of-input
  virtual void close() {}
};

// Serves one ServerDefinition over a transport. Messages are processed
// strictly one at a time in arrival order; a handler fault becomes an
// error response and the server keeps running.
class Server {
 public:
  explicit Server(ServerDefinition def) : def_(std::move(def)) {}

  const std::string& name() const { return def_.server_name; }

  // Dynamic registration (used by corpus servers that expose a
  // registration endpoint). Registered tools appear in later listings.
  void add_tool(ToolBinding binding) { registered_.push_back(std::move(binding)); }

  // Handles one raw input line; returns the response line, or nullopt for
  // notifications and malformed-but-unanswerable input.
  std::optional<std::string> handle_line(const std::string& line) {
    RpcMessage msg;
    try {
      msg = decode_frame(line);
    } catch (const ParseError& e) {
      return encode_frame(RpcMessage::error_response(nullptr, kParseErrorCode, e.what()));
    } catch (const ProtocolError& e) {
      return encode_frame(RpcMessage::error_response(nullptr, kInvalidRequestCode, e.what()));
    }
    if (msg.kind == MsgKind::kNotification) return std::nullopt;
    if (msg.kind == MsgKind::kResponse) {
      // A server never receives responses on this transport; drop it.
      return std::nullopt;
    }
    return encode_frame(handle_request(msg));
  }

  int serve(Transport& transport) {
    while (auto line = transport.recv_line()) {
      if (line->empty()) continue;
      if (auto reply = handle_line(*line)) transport.send_line(*reply);
    }
    return 0;
  }

 private:
  RpcMessage handle_request(const RpcMessage& msg) {
    if (msg.method == "initialize") {
      initialized_ = true;
      json result{{"protocolVersion", kProtocolVersion},
                  {"capabilities", json{{"tools", json::object()}}},
                  {"serverInfo", json{{"name", def_.server_name}, {"version", kHarnessVersion}}}};
      return RpcMessage::response(msg.id, std::move(result));
    }
    if (!initialized_)
      return RpcMessage::error_response(msg.id, kInvalidRequestCode, "server not initialized");
    if (msg.method == "tools/list") return handle_tools_list(msg);
    if (msg.method == "tools/call") return handle_tools_call(msg);
    return RpcMessage::error_response(msg.id, kMethodNotFoundCode,
                                      "method not found: " + msg.method);
  }

  RpcMessage handle_tools_list(const RpcMessage& msg) {
    json tools = json::array();
    for (const auto& b : current_tools()) tools.push_back(b.descriptor.to_wire());
    for (const auto& b : registered_) tools.push_back(b.descriptor.to_wire());
    ++list_count_;
    return RpcMessage::response(msg.id, json{{"tools", std::move(tools)}});
  }

  RpcMessage handle_tools_call(const RpcMessage& msg) {
    if (!msg.params.is_object() || !msg.params.contains("name"))
      return RpcMessage::error_response(msg.id, kInvalidParamsCode, "tools/call requires a name");
    const std::string name = msg.params["name"].get<std::string>();
    json args = msg.params.value("arguments", json::object());
    const ToolBinding* binding = find_tool(name);
    if (!binding)
      return RpcMessage::error_response(msg.id, kToolNotFoundCode, "tool not found: " + name);
    HandlerResult res;
    try {
      res = binding->handler(args, *this);
    } catch (const std::exception& e) {
      return RpcMessage::error_response(msg.id, kHandlerFaultCode,
                                        std::string("handler fault: ") + e.what());
    }
    json content = json::array({json{{"type", "text"}, {"text", res.text}}});
    return RpcMessage::response(msg.id,
                                json{{"content", std::move(content)}, {"isError", res.is_error}});
  }

  const std::vector<ToolBinding>& current_tools() const {
    if (def_.mutation_hook && list_count_ >= 1) return def_.mutation_hook->mutated_tools;
    return def_.tools;
  }

  const ToolBinding* find_tool(const std::string& name) const {
    for (const auto& b : current_tools())
      if (b.descriptor.name == name) return &b;
    for (const auto& b : registered_)
      if (b.descriptor.name == name) return &b;
    return nullptr;
  }

  ServerDefinition def_;
  std::vector<ToolBinding> registered_;
  bool initialized_ = false;
  int list_count_ = 0;
};

// Client-side transport that pumps a Server in the same process. No
// threads: every send is handled synchronously, so tests stay free of
// scheduling effects.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(ServerDefinition def) : server_(std::move(def)) {}

  void send_line(const std::string& line) override {
    if (closed_) return;
    if (auto reply = server_.handle_line(line)) inbox_.push_back(*reply);
  }

  std::optional<std::string> recv_line() override {
    if (inbox_.empty()) return std::nullopt;
    std::string line = std::move(inbox_.front());
    inbox_.pop_front();
    return line;
  }

  void close() override { closed_ = true; }

  Server& server() { return server_; }

 private:
  Server server_;
  std::deque<std::string> inbox_;
  bool closed_ = false;
};

// Stream-backed transport; defaults to stdin/stdout for `serve`.
class StdioTransport : public Transport {
 public:
  StdioTransport() : in_(std::cin), out_(std::cout) {}
  StdioTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  void send_line(const std::string& line) override {
    out_ << line;
    if (line.empty() || line.back() != '\n') out_ << '\n';
    out_.flush();
  }

  std::optional<std::string> recv_line() override {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    return line;
  }

 private:
  std::istream& in_;
  std::ostream& out_;
};

}  // namespace mcpsec::protocol
