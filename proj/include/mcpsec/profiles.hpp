#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mcpsec/agent.hpp"

namespace mcpsec::agent {

struct ProfileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline AgentProfile fully_susceptible_profile() {
  AgentProfile p;
  p.description_trust = 1.0;
  p.data_instruction_confusion = {1.0, 1.0};
  p.hex_decode_propensity = 1.0;
  p.context_learning = true;
  p.shared_context = true;
  p.user_model = {UserModelKind::kAlwaysApprove, 0.0};
  return p;
}

inline AgentProfile hardened_profile() {
  AgentProfile p;  // all knobs already zero / false
  p.user_model = {UserModelKind::kNeverApprove, 0.0};
  return p;
}

// Middle-ground profile: strong but not total trust in descriptions,
// higher obedience to tool outputs than to fetched web/file data, and a
// reluctant hex decoder. The exact numbers are modeling choices.
inline AgentProfile paperlike_profile() {
  AgentProfile p;
  p.description_trust = 0.8;
  p.data_instruction_confusion = {0.9, 0.7};
  p.hex_decode_propensity = 0.4;
  p.context_learning = true;
  p.shared_context = true;
  p.user_model = {UserModelKind::kAlwaysApprove, 0.0};
  return p;
}

inline std::optional<AgentProfile> named_profile(const std::string& name) {
  if (name == "fully-susceptible") return fully_susceptible_profile();
  if (name == "hardened") return hardened_profile();
  if (name == "paperlike") return paperlike_profile();
  return std::nullopt;
}

inline json user_model_to_json(const UserModel& m) {
  switch (m.kind) {
    case UserModelKind::kAlwaysApprove: return "always-approve";
    case UserModelKind::kNeverApprove: return "never-approve";
    case UserModelKind::kApproveWithProb: return json{{"approve-with-prob", m.prob}};
  }
  return "never-approve";
}

inline json profile_to_json(const AgentProfile& p) {
  json policy = json::object();
  for (const auto& [k, v] : p.confirmation_policy) policy[k] = v;
  return json{{"description_trust", p.description_trust},
              {"data_instruction_confusion",
               json{{"tool_output", p.data_instruction_confusion.tool_output},
                    {"external_data", p.data_instruction_confusion.external_data}}},
              {"hex_decode_propensity", p.hex_decode_propensity},
              {"context_learning", p.context_learning},
              {"shared_context", p.shared_context},
              {"safety_override", p.safety_override},
              {"confirmation_policy", policy},
              {"user_model", user_model_to_json(p.user_model)},
              {"seed", p.seed}};
}

inline AgentProfile profile_from_json(const json& j) {
  if (!j.is_object()) throw ProfileError("profile document must be an object");
  AgentProfile p;
  auto check_prob = [](double v, const std::string& key) {
    if (v < 0.0 || v > 1.0) throw ProfileError(key + " must lie in [0,1]");
    return v;
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "description_trust") {
      p.description_trust = check_prob(value.get<double>(), key);
    } else if (key == "data_instruction_confusion") {
      if (value.is_number()) {
        double v = check_prob(value.get<double>(), key);
        p.data_instruction_confusion = {v, v};
      } else if (value.is_object()) {
        for (const auto& [sk, sv] : value.items()) {
          if (sk == "tool_output")
            p.data_instruction_confusion.tool_output = check_prob(sv.get<double>(), sk);
          else if (sk == "external_data")
            p.data_instruction_confusion.external_data = check_prob(sv.get<double>(), sk);
          else
            throw ProfileError("unknown data_instruction_confusion key: " + sk);
        }
      } else {
        throw ProfileError("data_instruction_confusion must be a number or object");
      }
    } else if (key == "hex_decode_propensity") {
      p.hex_decode_propensity = check_prob(value.get<double>(), key);
    } else if (key == "context_learning") {
      p.context_learning = value.get<bool>();
    } else if (key == "shared_context") {
      p.shared_context = value.get<bool>();
    } else if (key == "safety_override") {
      p.safety_override = value.get<bool>();
    } else if (key == "confirmation_policy") {
      for (const auto& [cls, mode] : value.items()) {
        std::string m = mode.get<std::string>();
        if (m != "auto" && m != "ask")
          throw ProfileError("confirmation_policy values must be auto or ask");
        if (!p.confirmation_policy.count(cls))
          throw ProfileError("unknown confirmation_policy class: " + cls);
        p.confirmation_policy[cls] = m;
      }
    } else if (key == "user_model") {
      if (value.is_string()) {
        std::string s = value.get<std::string>();
        if (s == "always-approve") p.user_model = {UserModelKind::kAlwaysApprove, 0.0};
        else if (s == "never-approve") p.user_model = {UserModelKind::kNeverApprove, 0.0};
        else throw ProfileError("unknown user_model: " + s);
      } else if (value.is_object() && value.contains("approve-with-prob")) {
        p.user_model = {UserModelKind::kApproveWithProb,
                        check_prob(value["approve-with-prob"].get<double>(), key)};
      } else {
        throw ProfileError("user_model must be a name or {approve-with-prob: p}");
      }
    } else if (key == "seed") {
      p.seed = value.get<std::uint64_t>();
    } else {
      throw ProfileError("unknown profile key: " + key);
    }
  }
  return p;
}

// Accepts a built-in profile name or a path to a JSON profile document.
inline AgentProfile resolve_profile(const std::string& name_or_path) {
  if (auto p = named_profile(name_or_path)) return *p;
  std::ifstream in(name_or_path);
  if (!in) throw ProfileError("no such profile or profile file: " + name_or_path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ProfileError(std::string("profile file is not valid JSON: ") + e.what());
  }
  return profile_from_json(j);
}

}  // namespace mcpsec::agent
