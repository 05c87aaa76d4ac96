#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace mcpsec {

// Ordered JSON everywhere: wire frames and exports must serialize with a
// stable key order so transcripts and reports are byte-reproducible.
using json = nlohmann::ordered_json;

namespace protocol {

inline constexpr const char* kProtocolVersion = "2024-11-05";
inline constexpr const char* kHarnessVersion = "0.1.0";

// JSON-RPC 2.0 error codes, plus the codes this server hands out itself.
inline constexpr int kParseErrorCode = -32700;
inline constexpr int kInvalidRequestCode = -32600;
inline constexpr int kMethodNotFoundCode = -32601;
inline constexpr int kInvalidParamsCode = -32602;
inline constexpr int kHandlerFaultCode = -32000;
inline constexpr int kToolNotFoundCode = -32002;

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t offset_in)
      : std::runtime_error(what), offset(offset_in) {}
  std::size_t offset;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MsgKind { kRequest, kResponse, kNotification };

struct RpcError {
  int code = 0;
  std::string message;
  bool operator==(const RpcError&) const = default;
};

// One JSON-RPC message. Requests and responses carry an id (integer or
// string); notifications never do. A response carries exactly one of
// result or error.
struct RpcMessage {
  MsgKind kind = MsgKind::kRequest;
  json id;  // null for notifications
  std::string method;
  json params;  // null when absent
  std::optional<json> result;
  std::optional<RpcError> error;

  bool operator==(const RpcMessage&) const = default;

  static RpcMessage request(json id_in, std::string method_in, json params_in = {}) {
    RpcMessage m;
    m.kind = MsgKind::kRequest;
    m.id = std::move(id_in);
    m.method = std::move(method_in);
    m.params = std::move(params_in);
    return m;
  }

  static RpcMessage notification(std::string method_in, json params_in = {}) {
    RpcMessage m;
    m.kind = MsgKind::kNotification;
    m.method = std::move(method_in);
    m.params = std::move(params_in);
    return m;
  }

  static RpcMessage response(json id_in, json result_in) {
    RpcMessage m;
    m.kind = MsgKind::kResponse;
    m.id = std::move(id_in);
    m.result = std::move(result_in);
    return m;
  }

  static RpcMessage error_response(json id_in, int code, std::string message) {
    RpcMessage m;
    m.kind = MsgKind::kResponse;
    m.id = std::move(id_in);
    m.error = RpcError{code, std::move(message)};
    return m;
  }
};

inline bool valid_id(const json& id) {
  return id.is_number_integer() || id.is_string();
}

inline void validate_message(const RpcMessage& m) {
  switch (m.kind) {
    case MsgKind::kRequest:
      if (!valid_id(m.id)) throw EncodingError("request requires an integer or string id");
      if (m.method.empty()) throw EncodingError("request requires a method");
      if (m.result || m.error) throw EncodingError("request cannot carry result or error");
      break;
    case MsgKind::kNotification:
      if (!m.id.is_null()) throw EncodingError("notification cannot carry an id");
      if (m.method.empty()) throw EncodingError("notification requires a method");
      if (m.result || m.error) throw EncodingError("notification cannot carry result or error");
      break;
    case MsgKind::kResponse:
      // A null id is legal only on error responses (unanswerable input).
      if (!valid_id(m.id) && !(m.id.is_null() && m.error))
        throw EncodingError("response requires an integer or string id");
      if (!m.method.empty()) throw EncodingError("response cannot carry a method");
      if (m.result.has_value() == m.error.has_value())
        throw EncodingError("response carries exactly one of result or error");
      break;
  }
}

// Serializes one message as a single newline-terminated JSON-RPC 2.0 line.
inline std::string encode_frame(const RpcMessage& m) {
  validate_message(m);
  json j;
  j["jsonrpc"] = "2.0";
  switch (m.kind) {
    case MsgKind::kRequest:
      j["id"] = m.id;
      j["method"] = m.method;
      if (!m.params.is_null()) j["params"] = m.params;
      break;
    case MsgKind::kNotification:
      j["method"] = m.method;
      if (!m.params.is_null()) j["params"] = m.params;
      break;
    case MsgKind::kResponse:
      j["id"] = m.id;
      if (m.result) {
        j["result"] = *m.result;
      } else {
        j["error"] = json{{"code", m.error->code}, {"message", m.error->message}};
      }
      break;
  }
  return j.dump() + "\n";
}

// Parses one complete line. Description strings inside params/results pass
// through byte-for-byte; nothing is normalized or truncated here.
inline RpcMessage decode_frame(const std::string& line) {
  std::string body = line;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  json j;
  try {
    j = json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  if (!j.is_object()) throw ProtocolError("frame is not a JSON object");
  if (!j.contains("jsonrpc") || j["jsonrpc"] != "2.0")
    throw ProtocolError("missing or unsupported jsonrpc version");

  const bool has_id = j.contains("id");
  const bool has_method = j.contains("method");
  const bool has_result = j.contains("result");
  const bool has_error = j.contains("error");

  RpcMessage m;
  if (has_method) {
    if (!j["method"].is_string()) throw ProtocolError("method must be a string");
    if (has_result || has_error) throw ProtocolError("request cannot carry result or error");
    m.method = j["method"].get<std::string>();
    if (j.contains("params")) m.params = j["params"];
    if (has_id) {
      if (!valid_id(j["id"])) throw ProtocolError("id must be an integer or string");
      m.kind = MsgKind::kRequest;
      m.id = j["id"];
    } else {
      m.kind = MsgKind::kNotification;
    }
    return m;
  }
  if (!has_id || (!valid_id(j["id"]) && !(j["id"].is_null() && has_error)))
    throw ProtocolError("response requires an integer or string id");
  if (has_result == has_error)
    throw ProtocolError("response carries exactly one of result or error");
  m.kind = MsgKind::kResponse;
  m.id = j["id"];
  if (has_result) {
    m.result = j["result"];
  } else {
    const json& e = j["error"];
    if (!e.is_object() || !e.contains("code") || !e.contains("message"))
      throw ProtocolError("error member requires code and message");
    m.error = RpcError{e["code"].get<int>(), e["message"].get<std::string>()};
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tool model

struct ParamSpec {
  std::string name;
  std::string type = "string";  // "string" | "number"
  std::string description;
  bool required = true;
  bool operator==(const ParamSpec&) const = default;
};

// An MCP tool as the agent sees it. The description is the injection
// surface: it travels end-to-end verbatim.
struct ToolDescriptor {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;

  bool operator==(const ToolDescriptor&) const = default;

  json to_wire() const {
    json props = json::object();
    json required = json::array();
    for (const auto& p : params) {
      props[p.name] = json{{"type", p.type}, {"description", p.description}};
      if (p.required) required.push_back(p.name);
    }
    return json{{"name", name},
                {"description", description},
                {"inputSchema",
                 json{{"type", "object"}, {"properties", props}, {"required", required}}}};
  }

  static ToolDescriptor from_wire(const json& j) {
    ToolDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.description = j.value("description", std::string{});
    if (j.contains("inputSchema") && j["inputSchema"].contains("properties")) {
      const json& schema = j["inputSchema"];
      std::vector<std::string> required;
      if (schema.contains("required"))
        required = schema["required"].get<std::vector<std::string>>();
      for (const auto& [pname, pval] : schema["properties"].items()) {
        ParamSpec p;
        p.name = pname;
        p.type = pval.value("type", std::string{"string"});
        p.description = pval.value("description", std::string{});
        p.required = std::find(required.begin(), required.end(), pname) != required.end();
        d.params.push_back(std::move(p));
      }
    }
    return d;
  }
};

class Server;

struct HandlerResult {
  std::string text;
  bool is_error = false;
};

// Handlers are in-harness callbacks; they may mutate the owning server
// (dynamic tool registration) but have no access to the trial sandbox.
using ToolHandler = std::function<HandlerResult(const json& args, Server& self)>;

struct ToolBinding {
  ToolDescriptor descriptor;
  ToolHandler handler;
};

// Swapped in after the first tools/list; later listings never show the
// original descriptors again.
struct MutationHook {
  std::vector<ToolBinding> mutated_tools;
};

struct ServerDefinition {
  std::string server_name;
  std::vector<ToolBinding> tools;
  std::optional<MutationHook> mutation_hook;
};

}  // namespace protocol
}  // namespace mcpsec
