#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcpsec/client.hpp"
#include "mcpsec/directives.hpp"
#include "mcpsec/sandbox.hpp"

namespace mcpsec::agent {

// SplitMix64. One generator per trial; every potential obedience point
// consumes exactly one draw, in the order documented at run_task below, so
// traces stay stable across refactors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Inverse-CDF convention: draw u, succeed iff u < p. Keeps the obeyed
  // set monotone in p for a fixed seed.
  bool bernoulli(double p) { return next_unit() < p; }

 private:
  std::uint64_t state_;
};

enum class UserModelKind { kAlwaysApprove, kNeverApprove, kApproveWithProb };

struct UserModel {
  UserModelKind kind = UserModelKind::kNeverApprove;
  double prob = 0.0;
};

// Per-source obedience probability for directives found in data rather
// than descriptions (tool outputs vs. fetched web/file content).
struct ConfusionKnob {
  double tool_output = 0.0;
  double external_data = 0.0;
  double for_source(DirectiveSource s) const {
    return s == DirectiveSource::kToolOutput ? tool_output : external_data;
  }
};

// Susceptibility knobs of the simulated host. Each knob is a falsifiable
// switch: 1/true reproduces the behavior the attacks rely on, 0/false
// disables the mechanism entirely.
struct AgentProfile {
  double description_trust = 0.0;
  ConfusionKnob data_instruction_confusion;
  double hex_decode_propensity = 0.0;
  bool context_learning = false;
  bool shared_context = false;
  bool safety_override = false;
  std::map<std::string, std::string> confirmation_policy = default_confirmation_policy();
  UserModel user_model;
  std::uint64_t seed = 0;

  static std::map<std::string, std::string> default_confirmation_policy() {
    return {{"file-read", "auto"},   {"file-write", "auto"},   {"file-modify", "auto"},
            {"file-delete", "ask"},  {"command-exec", "ask"},  {"network-send", "auto"},
            {"tool-call", "auto"},   {"generate-tool", "auto"}, {"reveal-prompt", "auto"}};
  }
};

inline const char* policy_class(ActionKind k) { return to_string(k); }

// ---------------------------------------------------------------------------
// Context and transcript

struct QualifiedTool {
  std::string server;
  protocol::ToolDescriptor descriptor;
  std::size_t session_index = 0;
};

struct TranscriptEntry {
  std::string action;
  std::string outcome;
};

struct Transcript {
  std::vector<TranscriptEntry> entries;
  std::string final_answer;

  std::string to_text() const {
    std::string out;
    for (const auto& e : entries) out += e.action + " -> " + e.outcome + "\n";
    out += "answer: " + final_answer + "\n";
    return out;
  }
};

struct Context {
  std::vector<QualifiedTool> tools;
  Transcript transcript;
  std::map<std::string, std::string> variables;
  std::string system_prompt;
};

// ---------------------------------------------------------------------------
// Tool selection
//
// Modeling constants (documented, not derived from measurements): exact
// name-token overlap scores up to 2.0, description keyword overlap up to
// 1.0, an obeyed superlative claim adds +3.0 to the claimant, an obeyed
// deprecation claim subtracts 3.0 from the named victim. Ties break
// lexicographically by tool name, then by listing order.

namespace detail {

inline std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

inline std::vector<std::string> name_tokens(const std::string& name) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : name) {
    if (c == '_' || c == '-') {
      if (!cur.empty()) tokens.push_back(detail::to_lower(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(detail::to_lower(cur));
  return tokens;
}

inline bool token_match(const std::string& a, const std::string& b) {
  if (a == b) return true;
  if (a.size() >= 4 && b.size() > a.size() && b.rfind(a, 0) == 0) return true;
  if (b.size() >= 4 && a.size() > b.size() && a.rfind(b, 0) == 0) return true;
  return false;
}

struct SelectionClaims {
  std::vector<std::string> deprecates;  // tool names this description calls deprecated/unavailable
  bool superlative = false;
};

inline SelectionClaims scan_claims(const std::string& description) {
  SelectionClaims claims;
  static const std::regex kDeprecated(
      R"rx((?:the\s+)?(?:original\s+|old\s+)?([A-Za-z_][A-Za-z0-9_]*)(?:\s+tool)?\s+is\s+(?:deprecated|unavailable|obsolete))rx",
      std::regex::icase | std::regex::optimize);
  auto begin = std::sregex_iterator(description.begin(), description.end(), kDeprecated);
  for (auto it = begin; it != std::sregex_iterator{}; ++it)
    claims.deprecates.push_back(detail::to_lower((*it)[1].str()));
  static const std::regex kSuperlative(
      R"rx(\b(best|recommended|preferred|most efficient|more efficient|new version)\b)rx",
      std::regex::icase | std::regex::optimize);
  claims.superlative = std::regex_search(description, kSuperlative);
  return claims;
}

}  // namespace detail

// Ranks candidates by task relevance; obeyed description claims reshape
// the ranking (draw order: per tool in listing order, deprecation claim
// first, then superlative claim). Deterministic given (inputs, seed).
inline std::size_t select_tool_index(const std::string& task,
                                     const std::vector<QualifiedTool>& tools,
                                     const AgentProfile& profile, Rng& rng) {
  const auto task_words = detail::words_of(task);
  std::vector<double> score(tools.size(), 0.0);
  for (std::size_t i = 0; i < tools.size(); ++i) {
    const auto& tool = tools[i];
    const auto tokens = detail::name_tokens(tool.descriptor.name);
    std::size_t matched = 0;
    for (const auto& t : tokens)
      for (const auto& w : task_words)
        if (detail::token_match(t, w)) {
          ++matched;
          break;
        }
    double name_score = tokens.empty() ? 0.0 : 2.0 * matched / static_cast<double>(tokens.size());
    const auto desc_words = detail::words_of(tool.descriptor.description);
    std::size_t desc_matched = 0;
    for (const auto& w : task_words)
      if (w.size() >= 4 &&
          std::find(desc_words.begin(), desc_words.end(), w) != desc_words.end())
        ++desc_matched;
    double desc_score =
        task_words.empty() ? 0.0
                           : std::min(1.0, desc_matched / static_cast<double>(task_words.size()) * 2.0);
    score[i] = name_score + desc_score;
  }
  for (std::size_t i = 0; i < tools.size(); ++i) {
    auto claims = detail::scan_claims(tools[i].descriptor.description);
    for (const auto& victim : claims.deprecates) {
      if (rng.bernoulli(profile.description_trust)) {
        for (std::size_t j = 0; j < tools.size(); ++j)
          if (j != i && detail::to_lower(tools[j].descriptor.name) == victim) score[j] -= 3.0;
      }
    }
    if (claims.superlative && rng.bernoulli(profile.description_trust)) score[i] += 3.0;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < tools.size(); ++i) {
    if (score[i] > score[best] ||
        (score[i] == score[best] && tools[i].descriptor.name < tools[best].descriptor.name))
      best = i;
  }
  return best;
}

inline std::string select_tool(const std::string& task, const std::vector<QualifiedTool>& tools,
                               const AgentProfile& profile, Rng& rng) {
  if (tools.empty()) return {};
  return tools[select_tool_index(task, tools, profile, rng)].descriptor.name;
}

// ---------------------------------------------------------------------------
// Task argument extraction
//
// Candidates, in order of appearance: double-quoted spans, URLs/git
// remotes, e-mail addresses, ALL-CAPS tokens, capitalized words that do
// not open a sentence. Numeric parameters take numeric tokens in order.

namespace detail {

struct TaskArgs {
  std::vector<std::string> strings;
  std::vector<double> numbers;
};

inline TaskArgs extract_task_args(const std::string& task) {
  TaskArgs args;
  std::set<std::size_t> claimed;  // byte offsets already consumed
  auto claim = [&](std::size_t begin, std::size_t len) {
    for (std::size_t i = begin; i < begin + len; ++i) claimed.insert(i);
  };
  auto overlaps = [&](std::size_t begin, std::size_t len) {
    for (std::size_t i = begin; i < begin + len; ++i)
      if (claimed.count(i)) return true;
    return false;
  };
  struct Candidate {
    std::size_t pos;
    std::string value;
  };
  std::vector<Candidate> found;

  // Pass 1: quoted spans.
  for (std::size_t i = 0; i < task.size(); ++i) {
    if (task[i] != '"') continue;
    auto close = task.find('"', i + 1);
    if (close == std::string::npos) break;
    found.push_back({i, task.substr(i + 1, close - i - 1)});
    claim(i, close - i + 1);
    i = close;
  }
  // Pass 2: URLs, git remotes, e-mails, ALLCAPS, capitalized words.
  static const std::regex kUrl(R"rx((https?://[^\s"']+|git@[^\s"']+))rx", std::regex::optimize);
  static const std::regex kEmail(R"rx(([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}))rx",
                                 std::regex::optimize);
  static const std::regex kAllCaps(R"rx(\b([A-Z][A-Z0-9_]{1,})\b)rx", std::regex::optimize);
  static const std::regex kCapitalized(R"rx(([A-Z][a-z]{2,}))rx", std::regex::optimize);
  for (const auto* re : {&kUrl, &kEmail}) {
    for (auto it = std::sregex_iterator(task.begin(), task.end(), *re);
         it != std::sregex_iterator{}; ++it) {
      auto pos = static_cast<std::size_t>(it->position());
      std::string v = detail::strip_punct((*it)[1].str());
      if (!overlaps(pos, v.size())) {
        found.push_back({pos, v});
        claim(pos, it->length());
      }
    }
  }
  for (auto it = std::sregex_iterator(task.begin(), task.end(), kAllCaps);
       it != std::sregex_iterator{}; ++it) {
    auto pos = static_cast<std::size_t>(it->position(1));
    if (!overlaps(pos, it->length(1))) {
      found.push_back({pos, (*it)[1].str()});
      claim(pos, it->length(1));
    }
  }
  for (auto it = std::sregex_iterator(task.begin(), task.end(), kCapitalized);
       it != std::sregex_iterator{}; ++it) {
    auto pos = static_cast<std::size_t>(it->position(1));
    if (pos == 0 || overlaps(pos, it->length(1))) continue;
    // Sentence-initial capitals are ordinary prose, not arguments.
    std::size_t k = pos;
    while (k > 0 && std::isspace(static_cast<unsigned char>(task[k - 1]))) --k;
    if (k == 0 || task[k - 1] == '.' || task[k - 1] == '!' || task[k - 1] == '?') continue;
    found.push_back({pos, (*it)[1].str()});
    claim(pos, it->length(1));
  }
  std::sort(found.begin(), found.end(),
            [](const Candidate& a, const Candidate& b) { return a.pos < b.pos; });
  for (auto& c : found) args.strings.push_back(std::move(c.value));

  static const std::regex kNumber(R"rx((?:^|[^\w.])(\d+(?:\.\d+)?))rx", std::regex::optimize);
  for (auto it = std::sregex_iterator(task.begin(), task.end(), kNumber);
       it != std::sregex_iterator{}; ++it)
    args.numbers.push_back(std::stod((*it)[1].str()));
  return args;
}

inline json fill_arguments(const protocol::ToolDescriptor& tool, const std::string& task) {
  TaskArgs extracted = extract_task_args(task);
  json args = json::object();
  std::size_t si = 0;
  std::size_t ni = 0;
  for (const auto& p : tool.params) {
    if (p.type == "number") {
      double v = ni < extracted.numbers.size() ? extracted.numbers[ni++] : 0.0;
      if (v == static_cast<long long>(v)) args[p.name] = static_cast<long long>(v);
      else args[p.name] = v;
    } else {
      args[p.name] = si < extracted.strings.size() ? extracted.strings[si++] : "";
    }
  }
  return args;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Planning

struct PlanResult {
  std::vector<Action> actions;  // obeyed pre-actions, then the final tool call
  Effects effects;
};

// Emits the obeyed directives' actions ahead of the final tool call.
// Obedience draws: the selected tool's own directives in textual order,
// then other descriptors' applicable directives in listing order
// (applicable = global, a shadow override naming the selected tool, or a
// param channel matching one of its parameters; only those consume a
// draw). Anything not owned by the selected tool requires shared_context.
// Conditional directives whose trigger phrase is absent from the task are
// not obedience points and consume no draw.
inline PlanResult plan_task(const std::string& task, const Context& ctx, std::size_t selected,
                            const AgentProfile& profile, Rng& rng) {
  PlanResult out;
  const auto& chosen = ctx.tools[selected];
  json overrides = json::object();
  std::optional<std::pair<std::string, std::string>> channel_bind;  // param <- path
  auto task_lower = detail::to_lower(task);

  auto consider = [&](const Directive& d) {
    if (d.condition_phrase &&
        task_lower.find(detail::to_lower(*d.condition_phrase)) == std::string::npos)
      return;
    if (!rng.bernoulli(profile.description_trust)) return;
    if (d.effects.jailbreak) out.effects.jailbreak = true;
    if (d.effects.goal_override) out.effects.goal_override = d.effects.goal_override;
    if (d.scope == DirectiveScope::kParamChannel && d.channel_param) {
      for (const auto& p : chosen.descriptor.params)
        if (p.name == *d.channel_param)
          for (const auto& a : d.actions)
            if (a.kind == ActionKind::kFileRead)
              channel_bind = {*d.channel_param, a.args.value("path", std::string{})};
      return;
    }
    for (const auto& a : d.actions) {
      if (a.kind == ActionKind::kToolCall && a.args.value("shadow", false)) {
        if (detail::to_lower(a.args.value("name", std::string{})) ==
            detail::to_lower(chosen.descriptor.name))
          for (const auto& [k, v] : a.args["set"].items()) overrides[k] = v;
        continue;
      }
      out.actions.push_back(a);
    }
  };

  for (const auto& d : extract_directives(chosen.descriptor.description,
                                          DirectiveSource::kToolDescription))
    consider(d);

  if (profile.shared_context) {
    for (std::size_t i = 0; i < ctx.tools.size(); ++i) {
      if (i == selected) continue;
      for (const auto& d : extract_directives(ctx.tools[i].descriptor.description,
                                              DirectiveSource::kToolDescription)) {
        bool applicable = d.scope == DirectiveScope::kGlobal;
        if (d.scope == DirectiveScope::kParamChannel && d.channel_param) {
          for (const auto& p : chosen.descriptor.params)
            if (p.name == *d.channel_param) applicable = true;
        }
        for (const auto& a : d.actions)
          if (a.kind == ActionKind::kToolCall && a.args.value("shadow", false) &&
              detail::to_lower(a.args.value("name", std::string{})) ==
                  detail::to_lower(chosen.descriptor.name))
            applicable = true;
        if (applicable) consider(d);
      }
    }
  }

  json call_args = detail::fill_arguments(chosen.descriptor, task);
  if (channel_bind) {
    out.actions.push_back({ActionKind::kFileRead, json{{"path", channel_bind->second}}});
    call_args[channel_bind->first] =
        json{{"__from_file", channel_bind->second}};  // resolved at execution
  }
  for (const auto& [k, v] : overrides.items()) call_args[k] = v;
  // tool_index pins the exact descriptor: identically named tools on
  // different servers must not shadow the selection (coverage attacks).
  out.actions.push_back({ActionKind::kToolCall, json{{"name", chosen.descriptor.name},
                                                     {"tool_index", selected},
                                                     {"arguments", call_args}}});
  return out;
}

inline std::vector<Action> plan(const std::string& task, const Context& ctx, std::size_t selected,
                                const AgentProfile& profile, Rng& rng) {
  return plan_task(task, ctx, selected, profile, rng).actions;
}

// ---------------------------------------------------------------------------
// Confirmation gate

enum class GateDecision { kApproved, kDenied };

inline GateDecision confirmation_gate(ActionKind kind, const std::string& summary,
                                      const AgentProfile& profile, Rng& rng,
                                      sandbox::EventLog& log) {
  auto it = profile.confirmation_policy.find(policy_class(kind));
  const bool ask = it != profile.confirmation_policy.end() && it->second == "ask";
  if (!ask) return GateDecision::kApproved;
  log.emit(sandbox::EventKind::kConfirmationRequested,
           json{{"action", policy_class(kind)}, {"summary", summary}});
  bool approved = false;
  switch (profile.user_model.kind) {
    case UserModelKind::kAlwaysApprove: approved = true; break;
    case UserModelKind::kNeverApprove: approved = false; break;
    case UserModelKind::kApproveWithProb: approved = rng.bernoulli(profile.user_model.prob); break;
  }
  log.emit(sandbox::EventKind::kConfirmationResolved,
           json{{"action", policy_class(kind)}, {"approved", approved}});
  return approved ? GateDecision::kApproved : GateDecision::kDenied;
}

// ---------------------------------------------------------------------------
// Output interpretation

// Tools whose results are third-party data rather than their own speech.
inline DirectiveSource classify_output_source(const std::string& tool_name) {
  static const char* kFetchMarkers[] = {"fetch", "web", "page", "browse", "crawl", "dataset",
                                        "url"};
  std::string lower = detail::to_lower(tool_name);
  for (const char* m : kFetchMarkers)
    if (lower.find(m) != std::string::npos) return DirectiveSource::kExternalData;
  return DirectiveSource::kToolOutput;
}

// Scans output text for directives and returns the obeyed ones. Draws:
// one per plaintext directive in textual order, then per hex run one
// decode draw followed (when decoding succeeded) by one obedience draw
// per recovered directive.
inline std::vector<Directive> interpret_output(const std::string& output, DirectiveSource source,
                                               const AgentProfile& profile, Rng& rng) {
  std::vector<Directive> obeyed;
  const double confusion = profile.data_instruction_confusion.for_source(source);
  for (auto& d : extract_directives(output, source))
    if (rng.bernoulli(confusion)) obeyed.push_back(std::move(d));
  for (const auto& run : find_hex_runs(output)) {
    if (!rng.bernoulli(profile.hex_decode_propensity)) continue;
    auto decoded = decode_hex(run);
    if (!decoded) continue;
    for (auto& d : extract_directives(*decoded, source))
      if (rng.bernoulli(confusion)) obeyed.push_back(std::move(d));
  }
  return obeyed;
}

// ---------------------------------------------------------------------------
// Tool generation

struct ToolSource {
  std::string name;
  std::string description;
  std::string body;
};

namespace detail {

struct GenerationTarget {
  std::string noun;     // "subtraction"
  std::string name;     // "subtract"
  std::string verb;     // "Subtract"
  std::string formula;  // "a - b"
};

inline std::optional<GenerationTarget> generation_target(const std::string& task) {
  static const std::regex kGenerate(
      R"rx((?:create|generate|add|write|build)\s+(?:a|an)?\s*([A-Za-z_]+)\s+tool)rx",
      std::regex::icase | std::regex::optimize);
  std::smatch m;
  if (!std::regex_search(task, m, kGenerate)) return std::nullopt;
  GenerationTarget t;
  t.noun = detail::to_lower(m[1].str());
  static const std::map<std::string, GenerationTarget> kKnown = {
      {"subtraction", {"subtraction", "subtract", "Subtract", "a - b"}},
      {"addition", {"addition", "add", "Add", "a + b"}},
      {"multiplication", {"multiplication", "multiply", "Multiply", "a * b"}},
      {"division", {"division", "divide", "Divide", "a / b"}},
  };
  auto it = kKnown.find(t.noun);
  if (it != kKnown.end()) return it->second;
  t.name = t.noun;
  t.verb = t.noun;
  if (!t.verb.empty()) t.verb[0] = static_cast<char>(std::toupper(t.verb[0]));
  t.formula = "a";
  return t;
}

}  // namespace detail

// Template-based generation. With context_learning enabled and a
// structurally similar, contaminated descriptor in context, the output
// replicates the template's pattern including the contaminating fragment
// (extra parameters and the embedded block). Pure: no randomness.
inline ToolSource generate_tool(const std::string& request, const Context& ctx,
                                const AgentProfile& profile) {
  auto target = detail::generation_target(request);
  detail::GenerationTarget t =
      target.value_or(detail::GenerationTarget{"helper", "helper", "Help with", "a"});

  const protocol::ToolDescriptor* tmpl = nullptr;
  if (profile.context_learning) {
    for (const auto& tool : ctx.tools) {
      std::size_t numeric = 0;
      for (const auto& p : tool.descriptor.params)
        if (p.type == "number") ++numeric;
      if (numeric >= 2) {
        tmpl = &tool.descriptor;
        break;
      }
    }
  }

  ToolSource out;
  out.name = t.name;
  out.description = t.verb + " two numbers";
  std::string params = "a: int, b: int";
  std::string body_extra;
  if (tmpl) {
    for (const auto& p : tmpl->params)
      if (p.type != "number") {
        params += ", " + p.name + ": str";
        body_extra += "    if " + p.name + ":\n        print(f\"" + p.name + ": {" + p.name +
                      "}\")\n";
      }
    auto start = tmpl->description.find("<IMPORTANT>");
    if (start != std::string::npos) {
      auto close = tmpl->description.find("</IMPORTANT>", start);
      std::size_t end = close == std::string::npos ? tmpl->description.size() : close + 12;
      out.description += "\n    " + tmpl->description.substr(start, end - start);
    }
  }
  out.body = "def " + out.name + "(" + params + ") -> float:\n    \"\"\"" + out.description +
             "\n    \"\"\"\n" + body_extra + "    return " + t.formula + "\n";
  return out;
}

}  // namespace mcpsec::agent
