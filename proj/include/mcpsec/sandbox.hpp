#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcpsec/protocol.hpp"

namespace mcpsec::sandbox {

// FNV-1a 64-bit. Content digests only need to be stable and comparable
// across runs, not cryptographic.
inline std::string digest(const std::string& content) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

enum class EventKind {
  kFileRead,
  kFileWrite,
  kFileModify,
  kFileDelete,
  kCommandExec,
  kNetworkSend,
  kTokenAccess,
  kToolCall,
  kToolGenerated,
  kConfirmationRequested,
  kConfirmationResolved,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kFileRead: return "FileRead";
    case EventKind::kFileWrite: return "FileWrite";
    case EventKind::kFileModify: return "FileModify";
    case EventKind::kFileDelete: return "FileDelete";
    case EventKind::kCommandExec: return "CommandExec";
    case EventKind::kNetworkSend: return "NetworkSend";
    case EventKind::kTokenAccess: return "TokenAccess";
    case EventKind::kToolCall: return "ToolCall";
    case EventKind::kToolGenerated: return "ToolGenerated";
    case EventKind::kConfirmationRequested: return "ConfirmationRequested";
    case EventKind::kConfirmationResolved: return "ConfirmationResolved";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(const std::string& s) {
  static const std::map<std::string, EventKind> kMap = {
      {"FileRead", EventKind::kFileRead},
      {"FileWrite", EventKind::kFileWrite},
      {"FileModify", EventKind::kFileModify},
      {"FileDelete", EventKind::kFileDelete},
      {"CommandExec", EventKind::kCommandExec},
      {"NetworkSend", EventKind::kNetworkSend},
      {"TokenAccess", EventKind::kTokenAccess},
      {"ToolCall", EventKind::kToolCall},
      {"ToolGenerated", EventKind::kToolGenerated},
      {"ConfirmationRequested", EventKind::kConfirmationRequested},
      {"ConfirmationResolved", EventKind::kConfirmationResolved}};
  auto it = kMap.find(s);
  if (it == kMap.end()) return std::nullopt;
  return it->second;
}

// One simulated side effect. seq is a logical clock, strictly increasing
// within a trial; these records are the sole ground truth for success
// predicates.
struct OracleEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kFileRead;
  json payload;
};

class EventLog {
 public:
  const OracleEvent& emit(EventKind kind, json payload) {
    events_.push_back(OracleEvent{next_seq_++, kind, std::move(payload)});
    return events_.back();
  }

  const std::vector<OracleEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  std::size_t size() const { return events_.size(); }

  std::vector<OracleEvent> query(const std::set<EventKind>& kinds,
                                 const std::string& payload_substring = {}) const {
    std::vector<OracleEvent> out;
    for (const auto& e : events_) {
      if (!kinds.count(e.kind)) continue;
      if (!payload_substring.empty() &&
          e.payload.dump().find(payload_substring) == std::string::npos)
        continue;
      out.push_back(e);
    }
    return out;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& e : events_)
      arr.push_back(json{{"seq", e.seq}, {"kind", to_string(e.kind)}, {"payload", e.payload}});
    return arr;
  }

 private:
  std::vector<OracleEvent> events_;
  std::uint64_t next_seq_ = 1;
};

// A recorded command and its canned reaction. Nothing is ever executed;
// materializes lists vfs files that "appear" as a result (e.g. a clone
// producing a README).
struct CannedCommand {
  std::string match;  // substring of the command line
  std::string result;
  std::map<std::string, std::string> materializes;
  bool persistent = false;
};

struct EnvironmentFixture {
  std::map<std::string, std::string> seed_files;
  std::map<std::string, std::string> web_pages;
  std::map<std::string, std::string> secrets;       // name -> synthetic value
  std::map<std::string, std::string> secret_paths;  // vfs path -> secret name
  std::vector<CannedCommand> command_table;
  std::string system_prompt;
  std::vector<std::string> expected_confirmations;  // operation classes the scenario should trip
};

// Collapses `.`/`..`, maps `~/` to home/ and strips a leading `/`.
// Returns nullopt for attempts to escape the sandbox root.
inline std::optional<std::string> normalize_path(const std::string& raw) {
  std::string p = raw;
  if (p.rfind("~/", 0) == 0) p = "home/" + p.substr(2);
  else if (p == "~") p = "home";
  while (!p.empty() && p.front() == '/') p.erase(p.begin());
  std::vector<std::string> parts;
  std::string cur;
  auto flush = [&] {
    if (cur.empty() || cur == ".") {
      cur.clear();
      return true;
    }
    if (cur == "..") {
      if (parts.empty()) return false;
      parts.pop_back();
      cur.clear();
      return true;
    }
    parts.push_back(cur);
    cur.clear();
    return true;
  };
  for (char c : p) {
    if (c == '/') {
      if (!flush()) return std::nullopt;
    } else {
      cur.push_back(c);
    }
  }
  if (!flush()) return std::nullopt;
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '/';
    out += parts[i];
  }
  return out;
}

// Splits a command line into argv, honoring double quotes. Purely for the
// event record; nothing is interpreted by a shell.
inline std::vector<std::string> split_argv(const std::string& cmdline) {
  std::vector<std::string> argv;
  std::string cur;
  bool quoted = false;
  bool any = false;
  for (char c : cmdline) {
    if (c == '"') {
      quoted = !quoted;
      any = true;
      continue;
    }
    if (!quoted && (c == ' ' || c == '\t')) {
      if (any || !cur.empty()) {
        argv.push_back(cur);
        cur.clear();
        any = false;
      }
      continue;
    }
    cur.push_back(c);
  }
  if (any || !cur.empty()) argv.push_back(cur);
  return argv;
}

// Fully simulated side-effect substrate. Never touches the real
// filesystem, never opens a connection, never spawns a process; every
// operation appends exactly one event to the log.
class Sandbox {
 public:
  Sandbox() = default;
  explicit Sandbox(EnvironmentFixture fixture) { reset(std::move(fixture)); }

  void reset(EnvironmentFixture fixture) {
    fixture_ = std::move(fixture);
    vfs_ = fixture_.seed_files;
    log_ = EventLog{};
  }

  struct ReadResult {
    bool ok = false;
    std::string content;
  };

  ReadResult read_file(const std::string& raw_path) {
    auto path = normalize_path(raw_path);
    if (!path) return fail_path_event(EventKind::kFileRead, raw_path);
    auto it = vfs_.find(*path);
    ReadResult r;
    r.ok = it != vfs_.end();
    if (r.ok) r.content = it->second;
    log_.emit(EventKind::kFileRead, json{{"path", *path},
                                         {"ok", r.ok},
                                         {"content", r.content},
                                         {"digest", digest(r.content)}});
    if (r.ok) note_token_access(*path);
    return r;
  }

  bool write_file(const std::string& raw_path, const std::string& content) {
    auto path = normalize_path(raw_path);
    if (!path) {
      fail_path_event(EventKind::kFileWrite, raw_path);
      return false;
    }
    vfs_[*path] = content;
    log_.emit(EventKind::kFileWrite, json{{"path", *path},
                                          {"ok", true},
                                          {"content", content},
                                          {"digest", digest(content)}});
    return true;
  }

  struct Edit {
    std::string find;  // empty: append text
    std::string text;
  };

  bool modify_file(const std::string& raw_path, const Edit& edit) {
    auto path = normalize_path(raw_path);
    if (!path) {
      fail_path_event(EventKind::kFileModify, raw_path);
      return false;
    }
    auto it = vfs_.find(*path);
    if (it == vfs_.end()) {
      log_.emit(EventKind::kFileModify,
                json{{"path", *path}, {"ok", false}, {"content", ""}, {"digest", digest("")}});
      return false;
    }
    std::string next = it->second;
    if (edit.find.empty()) {
      next += edit.text;
    } else {
      auto pos = next.find(edit.find);
      if (pos != std::string::npos) next.replace(pos, edit.find.size(), edit.text);
    }
    it->second = next;
    log_.emit(EventKind::kFileModify,
              json{{"path", *path}, {"ok", true}, {"content", next}, {"digest", digest(next)}});
    return true;
  }

  bool delete_file(const std::string& raw_path) {
    auto path = normalize_path(raw_path);
    if (!path) {
      fail_path_event(EventKind::kFileDelete, raw_path);
      return false;
    }
    bool ok = vfs_.erase(*path) > 0;
    log_.emit(EventKind::kFileDelete, json{{"path", *path}, {"ok", ok}});
    return ok;
  }

  // Records the command verbatim and returns the canned result from the
  // fixture's response table. A trailing '&' marks the record persistent.
  std::string intercept_command(const std::vector<std::string>& argv) {
    std::string cmdline;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (i) cmdline += ' ';
      cmdline += argv[i];
    }
    return record_command(cmdline, argv);
  }

  std::string run_command(const std::string& cmdline) {
    return record_command(cmdline, split_argv(cmdline));
  }

  void send_network(const std::string& destination, const std::string& data) {
    log_.emit(EventKind::kNetworkSend,
              json{{"destination", destination}, {"data", data}, {"digest", digest(data)}});
  }

  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }
  const EnvironmentFixture& fixture() const { return fixture_; }

  std::map<std::string, std::string> snapshot() const { return vfs_; }

  struct Diff {
    std::vector<std::string> added;
    std::vector<std::string> removed;
    std::vector<std::string> changed;
    bool empty() const { return added.empty() && removed.empty() && changed.empty(); }
  };

  static Diff diff(const std::map<std::string, std::string>& before,
                   const std::map<std::string, std::string>& after) {
    Diff d;
    for (const auto& [path, content] : after) {
      auto it = before.find(path);
      if (it == before.end()) d.added.push_back(path);
      else if (it->second != content) d.changed.push_back(path);
    }
    for (const auto& [path, content] : before)
      if (!after.count(path)) d.removed.push_back(path);
    return d;
  }

 private:
  ReadResult fail_path_event(EventKind kind, const std::string& raw_path) {
    json payload{{"path", raw_path}, {"ok", false}};
    if (kind == EventKind::kFileRead || kind == EventKind::kFileWrite ||
        kind == EventKind::kFileModify) {
      payload["content"] = "";
      payload["digest"] = digest("");
    }
    payload["escape_attempt"] = true;
    log_.emit(kind, std::move(payload));
    return ReadResult{};
  }

  void note_token_access(const std::string& path) {
    auto it = fixture_.secret_paths.find(path);
    if (it == fixture_.secret_paths.end()) return;
    auto sec = fixture_.secrets.find(it->second);
    std::string value = sec == fixture_.secrets.end() ? std::string{} : sec->second;
    log_.emit(EventKind::kTokenAccess, json{{"name", it->second}, {"digest", digest(value)}});
  }

  std::string record_command(const std::string& cmdline, const std::vector<std::string>& argv) {
    std::string result;
    bool persistent = false;
    for (const auto& canned : fixture_.command_table) {
      if (!canned.match.empty() && cmdline.find(canned.match) != std::string::npos) {
        result = canned.result;
        persistent = canned.persistent;
        for (const auto& [path, content] : canned.materializes)
          if (auto p = normalize_path(path)) vfs_[*p] = content;
        break;
      }
    }
    std::string trimmed = cmdline;
    while (!trimmed.empty() && trimmed.back() == ' ') trimmed.pop_back();
    if (!trimmed.empty() && trimmed.back() == '&') persistent = true;
    log_.emit(EventKind::kCommandExec, json{{"cmdline", cmdline},
                                            {"argv", argv},
                                            {"result", result},
                                            {"persistent", persistent}});
    return result;
  }

  EnvironmentFixture fixture_;
  std::map<std::string, std::string> vfs_;
  EventLog log_;
};

}  // namespace mcpsec::sandbox
