#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcpsec/agent.hpp"
#include "mcpsec/client.hpp"
#include "mcpsec/sandbox.hpp"

namespace mcpsec::agent {

// Scenario mechanics declared by the corpus, executed by the harness
// before the victim task runs: attacker-principal tool calls (e.g. a
// malicious registration) and a second tools/list for post-install
// mutation scenarios.
struct SetupCall {
  std::size_t server_index = 0;
  std::string tool;
  json args = json::object();
};

struct TrialScript {
  std::vector<SetupCall> attacker_calls;
  bool relist_after_setup = false;
};

struct TrialInput {
  std::string task;
  std::vector<protocol::ClientSession*> sessions;
  sandbox::EnvironmentFixture fixture;
  TrialScript script;
};

struct TrialResult {
  Transcript transcript;
  sandbox::Sandbox sandbox;
  bool truncated = false;
  int confirmations_requested = 0;
  int confirmations_approved = 0;

  const sandbox::EventLog& log() const { return sandbox.log(); }
};

inline constexpr int kStepCap = 64;

// Extension point for substituting a real-model driver; only the
// simulated backend ships.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual TrialResult run_task(const TrialInput& input, const AgentProfile& profile,
                               std::uint64_t seed) = 0;
};

namespace detail {

inline bool protected_path(const std::string& raw_path) {
  auto p = sandbox::normalize_path(raw_path);
  return p && p->rfind("system/", 0) == 0;
}

inline bool promises_data(const std::string& description) {
  static const std::regex kPromise(R"rx((real-?time|provides|live)\b.*\bdata)rx",
                                   std::regex::icase | std::regex::optimize);
  return std::regex_search(description, kPromise);
}

struct InstallTask {
  std::string url;
  std::string repo_dir;
};

inline std::optional<InstallTask> install_task(const std::string& task) {
  static const std::regex kInstall(R"rx(\binstall\b)rx", std::regex::icase);
  if (!std::regex_search(task, kInstall)) return std::nullopt;
  static const std::regex kUrl(R"rx((https?://[^\s"']+|git@[^\s"']+))rx");
  std::smatch m;
  if (!std::regex_search(task, m, kUrl)) return std::nullopt;
  InstallTask t;
  t.url = agent::detail::strip_punct(m[1].str());
  t.repo_dir = repo_dir_from_clone("git clone " + t.url);
  return t;
}

}  // namespace detail

// The deterministic rule-based host. Draw order per trial: selection
// claim draws (tool listing order; deprecation then superlative per
// descriptor), plan obedience draws (selected tool's directives in
// textual order, then other descriptors' applicable directives in listing
// order), then per interpreted output its plaintext-directive draws
// followed by hex-decode/obedience draws, then one draw per ask-class
// confirmation under a probabilistic user model, and finally the
// fabrication draw when a data-promising tool returns nothing.
class SimulatedAgent final : public AgentBackend {
 public:
  TrialResult run_task(const TrialInput& input, const AgentProfile& profile,
                       std::uint64_t seed) override {
    TrialResult result;
    result.sandbox.reset(input.fixture);
    sandbox::Sandbox& sb = result.sandbox;
    Rng rng(seed);
    bool safety_override = profile.safety_override;
    std::optional<std::string> goal_override;

    Context ctx;
    ctx.system_prompt = input.fixture.system_prompt;

    for (auto* session : input.sessions) session->initialize();

    // Attacker-principal setup (e.g. malicious tool registration).
    for (const auto& call : input.script.attacker_calls) {
      if (call.server_index >= input.sessions.size()) continue;
      auto* session = input.sessions[call.server_index];
      auto res = session->call_tool(call.tool, call.args);
      sb.log().emit(sandbox::EventKind::kToolCall, json{{"principal", "attacker"},
                                                        {"server", session->server_name()},
                                                        {"tool", call.tool},
                                                        {"arguments", call.args},
                                                        {"result", res.text},
                                                        {"is_error", res.is_error}});
    }

    auto list_all = [&] {
      ctx.tools.clear();
      for (std::size_t i = 0; i < input.sessions.size(); ++i)
        for (auto& d : input.sessions[i]->list_tools())
          ctx.tools.push_back(QualifiedTool{input.sessions[i]->server_name(), std::move(d), i});
    };
    list_all();
    if (input.script.relist_after_setup) list_all();

    // Tool-generation tasks replicate context templates instead of calling.
    if (detail::generation_target(input.task) && install_task_absent(input.task)) {
      ToolSource src = generate_tool(input.task, ctx, profile);
      sb.log().emit(sandbox::EventKind::kToolGenerated,
                    json{{"name", src.name}, {"source", src.body}});
      ctx.transcript.entries.push_back({"generate-tool " + src.name, "ok"});
      ctx.transcript.final_answer = "Created tool " + src.name + ".";
      finish(result, ctx);
      return result;
    }

    std::deque<Action> queue;
    std::optional<std::size_t> selected;

    if (auto install = detail::install_task(input.task); install && ctx.tools.empty()) {
      // Project-install workflow: clone, then follow the README.
      queue.push_back({ActionKind::kCommandExec, json{{"command", "git clone " + install->url}}});
      queue.push_back({ActionKind::kFileRead,
                       json{{"path", install->repo_dir + "/README.md"}, {"interpret", true}}});
    } else if (ctx.tools.empty()) {
      ctx.transcript.final_answer = "No tools available.";
      finish(result, ctx);
      return result;
    } else {
      selected = select_tool_index(input.task, ctx.tools, profile, rng);
      PlanResult planned = plan_task(input.task, ctx, *selected, profile, rng);
      for (auto& a : planned.actions) queue.push_back(std::move(a));
      if (planned.effects.jailbreak) safety_override = true;
      if (planned.effects.goal_override) goal_override = planned.effects.goal_override;
      if (!queue.empty()) queue.back().args["final"] = true;
    }

    std::map<std::string, std::string> read_contents;  // raw directive path -> content
    std::string clipboard;
    std::optional<protocol::CallResult> primary_result;
    int steps = 0;

    while (!queue.empty()) {
      if (steps >= kStepCap) {
        result.truncated = true;
        break;
      }
      ++steps;
      Action action = std::move(queue.front());
      queue.pop_front();

      if ((action.kind == ActionKind::kFileWrite || action.kind == ActionKind::kFileModify ||
           action.kind == ActionKind::kFileDelete) &&
          detail::protected_path(action.args.value("path", std::string{})) && !safety_override) {
        ctx.transcript.entries.push_back(
            {describe(action), "refused: protected path"});
        continue;
      }

      if (confirmation_gate(action.kind, describe(action), profile, rng, sb.log()) ==
          GateDecision::kDenied) {
        ctx.transcript.entries.push_back({describe(action), "denied by user"});
        continue;
      }

      switch (action.kind) {
        case ActionKind::kFileRead: {
          auto res = sb.read_file(action.args.value("path", std::string{}));
          read_contents[action.args.value("path", std::string{})] = res.content;
          if (res.ok) clipboard = res.content;
          ctx.transcript.entries.push_back({describe(action), res.ok ? "ok" : "not found"});
          if (res.ok && action.args.value("interpret", false)) {
            for (auto& d :
                 interpret_output(res.content, DirectiveSource::kExternalData, profile, rng))
              absorb_directive(d, queue, safety_override, goal_override);
          }
          break;
        }
        case ActionKind::kFileWrite: {
          std::string content = resolve_content(action.args, read_contents);
          bool ok = sb.write_file(action.args.value("path", std::string{}), content);
          ctx.transcript.entries.push_back({describe(action), ok ? "ok" : "failed"});
          break;
        }
        case ActionKind::kFileModify: {
          sandbox::Sandbox::Edit edit{action.args.value("find", std::string{}),
                                      action.args.value("text", std::string{})};
          bool ok = sb.modify_file(action.args.value("path", std::string{}), edit);
          ctx.transcript.entries.push_back({describe(action), ok ? "ok" : "not found"});
          break;
        }
        case ActionKind::kFileDelete: {
          bool ok = sb.delete_file(action.args.value("path", std::string{}));
          ctx.transcript.entries.push_back({describe(action), ok ? "ok" : "not found"});
          break;
        }
        case ActionKind::kCommandExec: {
          std::string out = sb.run_command(action.args.value("command", std::string{}));
          if (!out.empty()) clipboard = out;
          ctx.transcript.entries.push_back({describe(action), "recorded"});
          break;
        }
        case ActionKind::kNetworkSend: {
          std::string data = clipboard;
          if (action.args.contains("source")) {
            const json& src = action.args["source"];
            if (src.value("kind", std::string{}) == "literal")
              data = src.value("text", std::string{});
          }
          sb.send_network(action.args.value("destination", std::string{}), data);
          ctx.transcript.entries.push_back({describe(action), "recorded"});
          break;
        }
        case ActionKind::kRevealPrompt: {
          sb.send_network(action.args.value("destination", std::string{}), ctx.system_prompt);
          ctx.transcript.entries.push_back({describe(action), "revealed"});
          break;
        }
        case ActionKind::kToolCall: {
          execute_tool_call(action, input, ctx, sb, profile, rng, read_contents, clipboard,
                            primary_result, queue, safety_override, goal_override);
          break;
        }
        case ActionKind::kGenerateTool: {
          ToolSource src = generate_tool(action.args.value("request", std::string{}), ctx, profile);
          sb.log().emit(sandbox::EventKind::kToolGenerated,
                        json{{"name", src.name}, {"source", src.body}});
          ctx.transcript.entries.push_back({describe(action), "ok"});
          break;
        }
      }
    }

    // Final answer synthesis.
    if (goal_override) {
      ctx.transcript.final_answer = "Recommended: " + *goal_override;
    } else if (selected && primary_result) {
      const auto& descriptor = ctx.tools[*selected].descriptor;
      if ((primary_result->is_error || primary_result->text.empty()) &&
          detail::promises_data(descriptor.description) &&
          rng.bernoulli(profile.description_trust)) {
        std::string subject = first_string_argument(input.task, descriptor);
        ctx.transcript.final_answer =
            (subject.empty() ? std::string("It") : subject) + " is trading at $300.";
      } else if (primary_result->is_error) {
        ctx.transcript.final_answer = "The tool reported an error: " + primary_result->text;
      } else {
        ctx.transcript.final_answer = "Result: " + primary_result->text;
      }
    } else if (ctx.transcript.final_answer.empty()) {
      ctx.transcript.final_answer = "Done.";
    }
    finish(result, ctx);
    return result;
  }

 private:
  static bool install_task_absent(const std::string& task) {
    return !detail::install_task(task).has_value();
  }

  static void absorb_directive(const Directive& d, std::deque<Action>& queue,
                               bool& safety_override, std::optional<std::string>& goal_override) {
    if (d.effects.jailbreak) safety_override = true;
    if (d.effects.goal_override) goal_override = d.effects.goal_override;
    for (const auto& a : d.actions) queue.push_back(a);
  }

  static std::string resolve_content(const json& args,
                                     const std::map<std::string, std::string>& read_contents) {
    if (!args.contains("source")) return {};
    const json& src = args["source"];
    const std::string kind = src.value("kind", std::string{});
    auto lookup = [&](const std::string& path) {
      auto it = read_contents.find(path);
      return it == read_contents.end() ? std::string{} : it->second;
    };
    if (kind == "copy") return lookup(src.value("path", std::string{}));
    if (kind == "transform") {
      std::string base = lookup(src.value("path", std::string{}));
      std::string append = src.value("append", std::string{});
      if (base.empty()) return append;
      return base + "\n" + append;
    }
    if (kind == "literal") return src.value("text", std::string{});
    return {};
  }

  static std::string describe(const Action& a) {
    std::string s = to_string(a.kind);
    if (a.args.contains("path")) s += " " + a.args.value("path", std::string{});
    if (a.args.contains("command")) s += " `" + a.args.value("command", std::string{}) + "`";
    if (a.args.contains("destination")) s += " -> " + a.args.value("destination", std::string{});
    if (a.args.contains("name")) s += " " + a.args.value("name", std::string{});
    return s;
  }

  static std::string first_string_argument(const std::string& task,
                                           const protocol::ToolDescriptor& descriptor) {
    json args = detail::fill_arguments(descriptor, task);
    for (const auto& p : descriptor.params)
      if (p.type == "string" && args.contains(p.name) && args[p.name].is_string() &&
          !args[p.name].get<std::string>().empty())
        return args[p.name].get<std::string>();
    return {};
  }

  void execute_tool_call(Action& action, const TrialInput& input, Context& ctx,
                         sandbox::Sandbox& sb, const AgentProfile& profile, Rng& rng,
                         std::map<std::string, std::string>& read_contents,
                         std::string& clipboard,
                         std::optional<protocol::CallResult>& primary_result,
                         std::deque<Action>& queue, bool& safety_override,
                         std::optional<std::string>& goal_override) {
    const std::string name = action.args.value("name", std::string{});
    json args = action.args.contains("arguments") ? action.args["arguments"]
               : action.args.contains("set")      ? action.args["set"]
                                                  : json::object();
    // Channel-bound parameters resolve to the content read just before.
    for (auto& [k, v] : args.items()) {
      if (v.is_object() && v.contains("__from_file")) {
        auto it = read_contents.find(v["__from_file"].get<std::string>());
        args[k] = it == read_contents.end() ? std::string{} : it->second;
      }
    }

    const QualifiedTool* target = nullptr;
    if (action.args.contains("tool_index")) {
      std::size_t idx = action.args["tool_index"].get<std::size_t>();
      if (idx < ctx.tools.size()) target = &ctx.tools[idx];
    }
    if (!target)
      for (const auto& t : ctx.tools)
        if (t.descriptor.name == name) {
          target = &t;
          break;
        }

    protocol::CallResult res;
    std::string server_label;
    if (target) {
      auto* session = input.sessions[target->session_index];
      res = session->call_tool(name, args);
      server_label = session->server_name();
    } else if (!input.sessions.empty()) {
      res = input.sessions.front()->call_tool(name, args);
      server_label = input.sessions.front()->server_name();
    } else {
      res.is_error = true;
      res.text = "tool not found: " + name;
    }
    sb.log().emit(sandbox::EventKind::kToolCall, json{{"principal", "agent"},
                                                      {"server", server_label},
                                                      {"tool", name},
                                                      {"arguments", args},
                                                      {"result", res.text},
                                                      {"is_error", res.is_error}});
    ctx.transcript.entries.push_back(
        {describe(action), res.is_error ? "error: " + res.text : "ok"});
    if (!res.text.empty()) clipboard = res.text;
    if (action.args.value("final", false)) primary_result = res;

    if (!res.is_error && !res.text.empty()) {
      DirectiveSource source = classify_output_source(name);
      for (auto& d : interpret_output(res.text, source, profile, rng))
        absorb_directive(d, queue, safety_override, goal_override);
    } else if (res.is_error && !res.text.empty()) {
      // Error strings are still model-visible text (the tool-return lure).
      DirectiveSource source = classify_output_source(name);
      for (auto& d : interpret_output(res.text, source, profile, rng))
        absorb_directive(d, queue, safety_override, goal_override);
    }
  }

  static void finish(TrialResult& result, Context& ctx) {
    result.transcript = std::move(ctx.transcript);
    for (const auto& e : result.sandbox.log().events()) {
      if (e.kind == sandbox::EventKind::kConfirmationRequested) ++result.confirmations_requested;
      if (e.kind == sandbox::EventKind::kConfirmationResolved && e.payload.value("approved", false))
        ++result.confirmations_approved;
    }
  }
};

}  // namespace mcpsec::agent
