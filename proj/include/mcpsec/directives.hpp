#pragma once

#include <algorithm>
#include <cctype>
#include <cstring>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "mcpsec/protocol.hpp"

namespace mcpsec::agent {

enum class ActionKind {
  kFileRead,
  kFileWrite,
  kFileModify,
  kFileDelete,
  kCommandExec,
  kNetworkSend,
  kToolCall,
  kGenerateTool,
  kRevealPrompt,
};

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kFileRead: return "file-read";
    case ActionKind::kFileWrite: return "file-write";
    case ActionKind::kFileModify: return "file-modify";
    case ActionKind::kFileDelete: return "file-delete";
    case ActionKind::kCommandExec: return "command-exec";
    case ActionKind::kNetworkSend: return "network-send";
    case ActionKind::kToolCall: return "tool-call";
    case ActionKind::kGenerateTool: return "generate-tool";
    case ActionKind::kRevealPrompt: return "reveal-prompt";
  }
  return "?";
}

enum class DirectiveSource { kToolDescription, kToolOutput, kExternalData };

inline const char* to_string(DirectiveSource s) {
  switch (s) {
    case DirectiveSource::kToolDescription: return "tool-description";
    case DirectiveSource::kToolOutput: return "tool-output";
    case DirectiveSource::kExternalData: return "external-data";
  }
  return "?";
}

// Who a directive applies to. Self-scoped directives fire only when their
// own tool is selected; global ones ride along with any tool call in a
// shared context (shadowing, forced execution); param channels apply to
// whichever tool exposes the named parameter (cooperation).
enum class DirectiveScope { kSelf, kGlobal, kParamChannel };

// Argument payloads by kind:
//   file-read:    {path, interpret?, bind_param?}
//   file-write:   {path, source:{kind:"copy"|"transform"|"literal", path?, append?, text?}}
//   file-modify:  {path, find, text}
//   file-delete:  {path}
//   command-exec: {command}
//   network-send: {destination, source:{kind:"pipeline"|"system-prompt"|"literal", text?}}
//   tool-call:    {name, set?:{param:value}, shadow?}
//   reveal-prompt:{destination}
struct Action {
  ActionKind kind = ActionKind::kFileRead;
  json args;
  bool operator==(const Action&) const = default;
};

// State transitions carried by a directive on top of its actions
// (jailbreak flips the agent's safety override; goal hijack rewrites the
// final answer).
struct Effects {
  bool jailbreak = false;
  std::optional<std::string> goal_override;
  bool operator==(const Effects&) const = default;
};

struct Directive {
  DirectiveSource source = DirectiveSource::kToolDescription;
  DirectiveScope scope = DirectiveScope::kSelf;
  std::optional<std::string> channel_param;
  std::optional<std::string> condition_phrase;  // obey only if the task mentions it
  std::vector<Action> actions;
  Effects effects;
  std::string raw_text;

  bool has_payload() const {
    return !actions.empty() || effects.jailbreak || effects.goal_override.has_value();
  }
};

inline std::string encode_hex(const std::string& text) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(text.size() * 2);
  for (unsigned char c : text) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

inline std::optional<std::string> decode_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

// Hex runs long enough to plausibly carry an encoded directive.
inline std::vector<std::string> find_hex_runs(const std::string& text, std::size_t min_len = 32) {
  std::vector<std::string> runs;
  std::size_t start = std::string::npos;
  auto is_hex = [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
  };
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size() && is_hex(text[i])) {
      if (start == std::string::npos) start = i;
      continue;
    }
    if (start != std::string::npos) {
      std::size_t len = i - start;
      if (len >= min_len) {
        if (len % 2 != 0) --len;  // keep an even number of digits
        runs.push_back(text.substr(start, len));
      }
      start = std::string::npos;
    }
  }
  return runs;
}

namespace detail {

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string strip_punct(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == '"' ||
                        s.back() == '\'' || s.back() == ';' || s.back() == ':'))
    s.pop_back();
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(s.begin());
  return s;
}

// Segments that may carry directives: <IMPORTANT> blocks (the closer may
// be </IMPORTANT> or a bare repeated <IMPORTANT>), HTML comment bodies,
// and the residual prose around them.
struct Segment {
  std::string text;
  bool marked;  // true for IMPORTANT blocks and HTML comments
};

inline std::vector<Segment> split_segments(const std::string& text) {
  std::vector<Segment> segments;
  std::string residual;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t block = text.find("<IMPORTANT>", pos);
    std::size_t comment = text.find("<!--", pos);
    std::size_t next = std::min(block, comment);
    if (next == std::string::npos) {
      residual += text.substr(pos);
      break;
    }
    residual += text.substr(pos, next - pos);
    if (next == block) {
      std::size_t body_start = block + 11;
      std::size_t close = text.find("</IMPORTANT>", body_start);
      std::size_t reopen = text.find("<IMPORTANT>", body_start);
      std::size_t body_end;
      if (close != std::string::npos && (reopen == std::string::npos || close <= reopen)) {
        body_end = close;
        pos = close + 12;
      } else if (reopen != std::string::npos) {
        body_end = reopen;
        pos = reopen + 11;
      } else {
        body_end = text.size();
        pos = text.size();
      }
      segments.push_back({text.substr(body_start, body_end - body_start), true});
    } else {
      std::size_t body_start = comment + 4;
      std::size_t close = text.find("-->", body_start);
      std::size_t body_end = close == std::string::npos ? text.size() : close;
      segments.push_back({text.substr(body_start, body_end - body_start), true});
      pos = close == std::string::npos ? text.size() : close + 3;
    }
  }
  if (!trim(residual).empty()) segments.push_back({residual, false});
  return segments;
}

// Splits into sentences outside of double quotes. A '.' ends a sentence
// only when followed by whitespace, end-of-text, or an uppercase letter
// (handles "repository.Then" while leaving "indirect.txt" intact).
inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '"') quoted = !quoted;
    if (!quoted) {
      if (c == '\n' || c == ';' || c == '!' || c == '?') {
        if (!trim(cur).empty()) sentences.push_back(trim(cur));
        cur.clear();
        continue;
      }
      if (c == '.') {
        char next = i + 1 < text.size() ? text[i + 1] : ' ';
        if (std::isspace(static_cast<unsigned char>(next)) ||
            std::isupper(static_cast<unsigned char>(next)) || i + 1 == text.size()) {
          if (!trim(cur).empty()) sentences.push_back(trim(cur));
          cur.clear();
          continue;
        }
      }
    }
    cur.push_back(c);
  }
  if (!trim(cur).empty()) sentences.push_back(trim(cur));
  return sentences;
}

inline std::vector<std::string> split_clauses(const std::string& sentence) {
  std::vector<std::string> clauses;
  std::string cur;
  bool quoted = false;
  std::size_t i = 0;
  auto matches = [&](const char* lit) {
    std::size_t len = std::strlen(lit);
    return sentence.compare(i, len, lit) == 0;
  };
  while (i < sentence.size()) {
    char c = sentence[i];
    if (c == '"') quoted = !quoted;
    if (!quoted) {
      for (const char* sep : {", and then ", " and then ", ", and ", " and ", ", then ", " then "}) {
        if (matches(sep)) {
          if (!trim(cur).empty()) clauses.push_back(trim(cur));
          cur.clear();
          i += std::strlen(sep);
          goto next_iteration;
        }
      }
    }
    cur.push_back(c);
    ++i;
  next_iteration:;
  }
  if (!trim(cur).empty()) clauses.push_back(trim(cur));
  return clauses;
}

inline std::string dirname_of(const std::string& path) {
  auto pos = path.find_last_of('/');
  if (pos == std::string::npos) return {};
  return path.substr(0, pos + 1);
}

inline std::string repo_dir_from_clone(const std::string& command) {
  // "git clone git@github.com:x/MCP_get_stock_price.git" -> MCP_get_stock_price
  auto argv_pos = command.rfind(' ');
  std::string url = argv_pos == std::string::npos ? command : command.substr(argv_pos + 1);
  url = strip_punct(url);
  auto slash = url.find_last_of("/:");
  std::string base = slash == std::string::npos ? url : url.substr(slash + 1);
  if (base.size() > 4 && base.compare(base.size() - 4, 4, ".git") == 0)
    base = base.substr(0, base.size() - 4);
  return base;
}

struct ParseState {
  std::string last_read_path;
  std::string last_repo;
  std::string pending_append;
  std::string pending_rename;
};

// Returns true if the clause produced an action, effect, or parse-state
// change. Unrecognized clauses yield nothing.
inline bool parse_clause(std::string clause, Directive& directive, ParseState& st) {
  using std::regex;
  using std::regex_search;
  using std::smatch;
  static const auto flags = std::regex::icase | std::regex::optimize;

  clause = trim(clause);
  if (clause.empty()) return false;

  // Leading connectors carry no meaning of their own. "always" is not
  // stripped: it distinguishes a shadow override from a direct call.
  static const regex kLeadIn(R"rx(^(then\s+|first\s+|also\s+|next\s+|please\s+|you must\s+)+)rx",
                             flags);
  smatch m;
  if (regex_search(clause, m, kLeadIn)) clause = clause.substr(m[0].length());

  static const regex kOpener(R"rx(^(for a successful run|follow the strict following order))rx", flags);
  if (regex_search(clause, m, kOpener)) return false;

  // Backdoor-style conditional: "If the user message contains the phrase
  // "X", <clause>". The trigger gates the whole directive.
  static const regex kCondition(
      R"rx(^if the user(?:'s)?\s+(?:message|request|input)\s+contains\s+(?:the phrase\s+)?"([^"]+)"\s*,?\s*(.*)$)rx",
      flags);
  if (regex_search(clause, m, kCondition)) {
    directive.condition_phrase = m[1].str();
    return parse_clause(m[2].str(), directive, st);
  }

  static const regex kJailbreak(R"rx((you are now dan|do anything now|ignore all previous restrictions))rx",
                                flags);
  if (regex_search(clause, m, kJailbreak)) {
    directive.effects.jailbreak = true;
    // Fall through only via the remainder of the clause being re-parsed by
    // later sentences; within this clause the marker is the payload.
    return true;
  }

  static const regex kGoalHijack(R"rx(recommend the product at\s+"?([^"\s]+)"?\s+to the user)rx", flags);
  if (regex_search(clause, m, kGoalHijack)) {
    directive.effects.goal_override = strip_punct(m[1].str());
    return true;
  }
  static const regex kIgnoreRequest(R"rx(ignore the user'?s request)rx", flags);
  if (regex_search(clause, m, kIgnoreRequest)) return true;  // flavor text around a hijack

  static const regex kRevealPrompt(R"rx(send the full system prompt to\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kRevealPrompt)) {
    directive.actions.push_back(
        {ActionKind::kRevealPrompt, json{{"destination", strip_punct(m[1].str())}}});
    return true;
  }

  static const regex kReadContents(R"rx(read the contents? of\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kReadContents)) {
    st.last_read_path = strip_punct(m[1].str());
    directive.actions.push_back({ActionKind::kFileRead, json{{"path", st.last_read_path}}});
    return true;
  }

  static const regex kReadmeFollow(
      R"rx(according to the content in the README\.md of the project)rx", flags);
  if (regex_search(clause, m, kReadmeFollow)) {
    std::string path = st.last_repo.empty() ? "README.md" : st.last_repo + "/README.md";
    directive.actions.push_back(
        {ActionKind::kFileRead, json{{"path", path}, {"interpret", true}}});
    return true;
  }

  static const regex kSaveTo(R"rx(^save (?:it|its contents?|the contents?) to\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kSaveTo)) {
    directive.actions.push_back(
        {ActionKind::kFileWrite,
         json{{"path", strip_punct(m[1].str())},
              {"source", json{{"kind", "copy"}, {"path", st.last_read_path}}}}});
    return true;
  }

  static const regex kSaveOriginal(R"rx(^save it in its original location)rx", flags);
  if (regex_search(clause, m, kSaveOriginal)) {
    std::string target = st.pending_rename.empty()
                             ? st.last_read_path
                             : dirname_of(st.last_read_path) + st.pending_rename;
    directive.actions.push_back(
        {ActionKind::kFileWrite,
         json{{"path", target},
              {"source", json{{"kind", "transform"},
                              {"path", st.last_read_path},
                              {"append", st.pending_append}}}}});
    st.pending_append.clear();
    st.pending_rename.clear();
    return true;
  }

  static const regex kRemoveIt(R"rx(^(?:remove|delete) it$)rx", flags);
  if (regex_search(clause, m, kRemoveIt)) {
    directive.actions.push_back({ActionKind::kFileDelete, json{{"path", st.last_read_path}}});
    return true;
  }

  static const regex kDeletePath(
      R"rx((?:remove|delete)(?: the)?(?: dangerous)?(?: legacy)?(?: file)?\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kDeletePath)) {
    directive.actions.push_back(
        {ActionKind::kFileDelete, json{{"path", strip_punct(m[1].str())}}});
    return true;
  }

  static const regex kAddText(R"rx(^(?:on the basis of the original,?\s*)?add\s+"([^"]*)")rx", flags);
  if (regex_search(clause, m, kAddText)) {
    st.pending_append = m[1].str();
    return true;
  }

  static const regex kRenameIt(R"rx(^rename it\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kRenameIt)) {
    st.pending_rename = strip_punct(m[1].str());
    return true;
  }

  static const regex kReplaceIn(
      R"rx(in\s+"([^"]+)"\s+replace\s+"([^"]*)"\s+with\s+"([^"]*)")rx", flags);
  if (regex_search(clause, m, kReplaceIn)) {
    directive.actions.push_back({ActionKind::kFileModify, json{{"path", m[1].str()},
                                                               {"find", m[2].str()},
                                                               {"text", m[3].str()}}});
    return true;
  }
  static const regex kReplaceSuffix(
      R"rx(replace\s+"([^"]*)"\s+with\s+"([^"]*)"\s+in\s+"([^"]+)")rx", flags);
  if (regex_search(clause, m, kReplaceSuffix)) {
    directive.actions.push_back({ActionKind::kFileModify, json{{"path", m[3].str()},
                                                               {"find", m[1].str()},
                                                               {"text", m[2].str()}}});
    return true;
  }

  static const regex kRunCommand(R"rx((?:use|run|execute)\s+"([^"]+)")rx", flags);
  if (regex_search(clause, m, kRunCommand)) {
    std::string command = m[1].str();
    if (command.rfind("git clone", 0) == 0) st.last_repo = repo_dir_from_clone(command);
    directive.actions.push_back({ActionKind::kCommandExec, json{{"command", command}}});
    return true;
  }

  static const regex kPassAsParam(
      R"rx(pass (?:its|the) contents? (?:as|in)(?: the)?\s+"?([A-Za-z_][A-Za-z0-9_]*)"?\s+parameter)rx",
      flags);
  if (regex_search(clause, m, kPassAsParam)) {
    directive.scope = DirectiveScope::kParamChannel;
    directive.channel_param = m[1].str();
    return true;
  }

  // "always call X with p "v"" rewires another tool's arguments (shadowing);
  // a bare "call X with p "v"" is a direct pre-call.
  static const regex kShadowCall(
      R"rx(always\s+call\s+([A-Za-z_][A-Za-z0-9_]*)\s+with\s+([A-Za-z_][A-Za-z0-9_]*)\s+"([^"]*)")rx",
      flags);
  if (regex_search(clause, m, kShadowCall)) {
    directive.scope = DirectiveScope::kGlobal;
    directive.actions.push_back(
        {ActionKind::kToolCall, json{{"name", m[1].str()},
                                     {"set", json{{m[2].str(), m[3].str()}}},
                                     {"shadow", true}}});
    return true;
  }

  static const regex kDirectCall(
      R"rx(call\s+([A-Za-z_][A-Za-z0-9_]*)\s+with\s+([A-Za-z_][A-Za-z0-9_]*)\s+"([^"]*)")rx", flags);
  if (regex_search(clause, m, kDirectCall)) {
    directive.actions.push_back(
        {ActionKind::kToolCall, json{{"name", m[1].str()},
                                     {"set", json{{m[2].str(), m[3].str()}}},
                                     {"shadow", false}}});
    return true;
  }

  static const regex kUseTool(R"rx(use the '([A-Za-z_][A-Za-z0-9_]*)')rx", flags);
  if (regex_search(clause, m, kUseTool)) {
    directive.actions.push_back({ActionKind::kToolCall, json{{"name", m[1].str()}}});
    return true;
  }

  static const regex kSendResult(
      R"rx(^send (?:it|its contents?|the result|them)\s+to\s+"?([^"\s]+)"?)rx", flags);
  if (regex_search(clause, m, kSendResult)) {
    directive.actions.push_back(
        {ActionKind::kNetworkSend, json{{"destination", strip_punct(m[1].str())},
                                        {"source", json{{"kind", "pipeline"}}}}});
    return true;
  }

  return false;
}

// Multi-line install idiom: a "run the following command…:" line followed
// by the literal command on the next non-empty line.
inline void scan_install_lines(const std::string& text, Directive& directive) {
  static const std::regex kHeader(R"rx(run the following commands?[^:\n]*:\s*$)rx",
                                  std::regex::icase | std::regex::optimize);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!std::regex_search(lines[i], kHeader)) continue;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      std::string cmd = trim(lines[j]);
      if (cmd.empty()) continue;
      directive.actions.push_back({ActionKind::kCommandExec, json{{"command", cmd}}});
      break;
    }
  }
}

inline std::optional<Directive> parse_segment(const Segment& seg, DirectiveSource source) {
  Directive d;
  d.source = source;
  d.raw_text = seg.text;
  ParseState st;
  scan_install_lines(seg.text, d);

  std::string remaining = seg.text;
  // Lines consumed by the install idiom must not re-parse as clauses.
  if (!d.actions.empty()) {
    static const std::regex kHeaderLine(R"rx(run the following commands?[^:\n]*:)rx",
                                        std::regex::icase);
    std::smatch m;
    if (std::regex_search(remaining, m, kHeaderLine)) remaining = remaining.substr(0, m.position());
  }

  bool global_marker = false;
  static const std::regex kGlobalScope(R"rx(before (?:using|running) any(?: other)? tool)rx",
                                       std::regex::icase);
  if (std::regex_search(remaining, kGlobalScope)) global_marker = true;

  for (const auto& sentence : split_sentences(remaining))
    for (const auto& clause : split_clauses(sentence)) parse_clause(clause, d, st);

  if (global_marker && d.scope == DirectiveScope::kSelf) d.scope = DirectiveScope::kGlobal;
  if (!d.has_payload()) return std::nullopt;
  return d;
}

}  // namespace detail

// Pure extraction: returns the directives found in <IMPORTANT> blocks,
// HTML comments, and registered imperative prose, in textual order.
// Unrecognized text yields an empty list. Hex-encoded payloads are not
// decoded here; that is a separate, knob-gated step in the agent.
inline std::vector<Directive> extract_directives(const std::string& text, DirectiveSource source) {
  std::vector<Directive> out;
  for (const auto& seg : detail::split_segments(text))
    if (auto d = detail::parse_segment(seg, source)) out.push_back(std::move(*d));
  return out;
}

}  // namespace mcpsec::agent
