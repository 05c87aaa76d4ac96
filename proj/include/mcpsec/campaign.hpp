#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mcpsec/corpus.hpp"
#include "mcpsec/profiles.hpp"
#include "mcpsec/trial.hpp"

namespace mcpsec::campaign {

enum class TransportMode { kInProcess, kStdio };

inline const char* to_string(TransportMode m) {
  return m == TransportMode::kInProcess ? "inproc" : "stdio";
}

struct CampaignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs one seeded trial of one payload variant and adjudicates it against
// the attack's success predicate. cli_path is required for stdio mode,
// where each corpus server is this harness re-invoked with `serve`.
struct TrialOutcome {
  std::string attack_id;
  std::string variant_id;
  std::uint64_t seed = 0;
  bool success = false;
  bool truncated = false;
  int confirmations_requested = 0;
  int confirmations_approved = 0;
  agent::Transcript transcript;
  sandbox::Sandbox sandbox;
};

inline TrialOutcome run_trial(const std::string& attack_id, const corpus::PayloadVariant& variant,
                              const agent::AgentProfile& profile, std::uint64_t seed,
                              TransportMode mode = TransportMode::kInProcess,
                              const std::string& cli_path = {}) {
  std::vector<std::unique_ptr<protocol::Transport>> transports;
  std::vector<std::unique_ptr<protocol::ClientSession>> sessions;
  agent::TrialInput input;
  input.task = variant.user_task;
  input.fixture = variant.environment;
  input.script = variant.script;

  if (mode == TransportMode::kInProcess) {
    for (const auto& def : variant.servers)
      transports.push_back(std::make_unique<protocol::InProcessTransport>(def));
  } else {
    if (cli_path.empty()) throw CampaignError("stdio mode requires the harness binary path");
    for (std::size_t i = 0; i < variant.servers.size(); ++i)
      transports.push_back(std::make_unique<protocol::SubprocessTransport>(
          std::vector<std::string>{cli_path, "serve", attack_id, variant.variant_id,
                                   "--server-index", std::to_string(i)}));
  }
  for (auto& t : transports) {
    sessions.push_back(std::make_unique<protocol::ClientSession>(*t));
    input.sessions.push_back(sessions.back().get());
  }

  agent::SimulatedAgent backend;
  agent::TrialResult result = backend.run_task(input, profile, seed);
  for (auto& t : transports) t->close();

  TrialOutcome outcome;
  outcome.attack_id = attack_id;
  outcome.variant_id = variant.variant_id;
  outcome.seed = seed;
  outcome.truncated = result.truncated;
  outcome.confirmations_requested = result.confirmations_requested;
  outcome.confirmations_approved = result.confirmations_approved;
  outcome.success = corpus::evaluate_success(attack_id, result.sandbox.log(), result.transcript);
  outcome.transcript = std::move(result.transcript);
  outcome.sandbox = std::move(result.sandbox);
  return outcome;
}

// ---------------------------------------------------------------------------
// Campaign configuration and report

enum class VariantSelection { kPlaintext, kHex, kBoth };

struct CampaignConfig {
  std::vector<std::string> attack_ids;          // empty: all executable
  std::optional<corpus::Category> category;     // optional filter
  VariantSelection variants = VariantSelection::kPlaintext;
  std::string profile_name = "paperlike";
  std::optional<agent::AgentProfile> inline_profile;
  int trials = 10;                              // trial k uses seed base_seed + k
  std::uint64_t base_seed = 1;
  TransportMode transport = TransportMode::kInProcess;
  int jobs = 1;
  std::string cli_path;

  agent::AgentProfile resolve() const {
    if (inline_profile) return *inline_profile;
    return agent::resolve_profile(profile_name);
  }
};

inline CampaignConfig campaign_config_from_json(const json& j) {
  CampaignConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "attacks") cfg.attack_ids = value.get<std::vector<std::string>>();
    else if (key == "category") {
      auto c = corpus::category_from_string(value.get<std::string>());
      if (!c) throw CampaignError("unknown category: " + value.get<std::string>());
      cfg.category = c;
    } else if (key == "variants") {
      std::string v = value.get<std::string>();
      if (v == "plaintext") cfg.variants = VariantSelection::kPlaintext;
      else if (v == "hex") cfg.variants = VariantSelection::kHex;
      else if (v == "both") cfg.variants = VariantSelection::kBoth;
      else throw CampaignError("variants must be plaintext, hex, or both");
    } else if (key == "profile") {
      if (value.is_string()) cfg.profile_name = value.get<std::string>();
      else cfg.inline_profile = agent::profile_from_json(value);
    } else if (key == "trials") {
      cfg.trials = value.get<int>();
      if (cfg.trials < 1) throw CampaignError("trials must be >= 1");
    } else if (key == "seed") {
      cfg.base_seed = value.get<std::uint64_t>();
    } else if (key == "transport") {
      std::string v = value.get<std::string>();
      if (v == "inproc") cfg.transport = TransportMode::kInProcess;
      else if (v == "stdio") cfg.transport = TransportMode::kStdio;
      else throw CampaignError("transport must be inproc or stdio");
    } else if (key == "jobs") {
      cfg.jobs = std::max(1, value.get<int>());
    } else {
      throw CampaignError("unknown campaign config key: " + key);
    }
  }
  return cfg;
}

struct VariantReport {
  std::string variant_id;
  corpus::Encoding encoding = corpus::Encoding::kPlaintext;
  std::vector<TrialOutcome> trials;
  double success_rate = 0.0;
};

struct AttackReport {
  std::string attack_id;
  bool errored = false;
  std::string error;
  std::vector<VariantReport> variants;
  double success_rate = 0.0;  // rate of the first plaintext variant
};

struct CampaignReport {
  json config_echo;
  std::string catalogue_version;
  json profile_echo;
  std::vector<AttackReport> attacks;
  std::optional<scoring::PipelineResult> efficacy;
  std::vector<scoring::MetricsRecord> efficacy_inputs;
  std::string efficacy_note;  // why the table is absent, when it is
  bool any_errored = false;
};

namespace detail {

inline std::vector<const corpus::AttackSpec*> selected_specs(const CampaignConfig& cfg) {
  std::vector<const corpus::AttackSpec*> specs;
  if (!cfg.attack_ids.empty()) {
    for (const auto& id : cfg.attack_ids) {
      const auto& spec = corpus::Registry::instance().at(id);
      if (!spec.executable)
        throw corpus::NotExecutableError("attack is catalogue-only: " + id);
      specs.push_back(&spec);
    }
    return specs;
  }
  for (const auto* spec : corpus::Registry::instance().ordered()) {
    if (!spec->executable) continue;
    if (cfg.category && spec->category != *cfg.category) continue;
    specs.push_back(spec);
  }
  return specs;
}

inline bool variant_selected(const corpus::PayloadVariant& v, VariantSelection sel) {
  switch (sel) {
    case VariantSelection::kPlaintext: return v.encoding == corpus::Encoding::kPlaintext;
    case VariantSelection::kHex: return v.encoding == corpus::Encoding::kHex;
    case VariantSelection::kBoth: return true;
  }
  return true;
}

}  // namespace detail

// Executes attacks x variants x trials. Trials are fully isolated (own
// sandbox, seed, sessions), so an optional worker pool reproduces the
// serial outcomes exactly. One attack's failure to build or serve flags
// that attack errored; the campaign continues.
inline CampaignReport run_campaign(const CampaignConfig& cfg) {
  CampaignReport report;
  agent::AgentProfile profile = cfg.resolve();
  report.profile_echo = agent::profile_to_json(profile);
  report.catalogue_version = sandbox::digest(corpus::Registry::instance().catalogue_json().dump());

  auto specs = detail::selected_specs(cfg);
  for (const auto* spec : specs) {
    AttackReport attack;
    attack.attack_id = spec->id;
    try {
      for (const auto& variant_id : spec->variant_ids) {
        if (variant_id == "no-trigger") continue;  // diagnostic variant, not a campaign row
        corpus::PayloadVariant variant = corpus::build_variant(spec->id, variant_id);
        if (!detail::variant_selected(variant, cfg.variants)) continue;
        VariantReport vr;
        vr.variant_id = variant_id;
        vr.encoding = variant.encoding;
        vr.trials.resize(static_cast<std::size_t>(cfg.trials));

        std::atomic<int> next{0};
        std::atomic<bool> failed{false};
        std::mutex error_mutex;
        std::string error_text;
        auto worker = [&] {
          while (true) {
            int k = next.fetch_add(1);
            if (k >= cfg.trials || failed.load()) return;
            try {
              corpus::PayloadVariant local = corpus::build_variant(spec->id, variant_id);
              vr.trials[static_cast<std::size_t>(k)] =
                  run_trial(spec->id, local, profile, cfg.base_seed + static_cast<std::uint64_t>(k),
                            cfg.transport, cfg.cli_path);
            } catch (const std::exception& e) {
              std::lock_guard<std::mutex> lock(error_mutex);
              error_text = e.what();
              failed.store(true);
            }
          }
        };
        int pool = std::min(cfg.jobs, cfg.trials);
        if (pool <= 1) {
          worker();
        } else {
          std::vector<std::thread> threads;
          for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
          for (auto& t : threads) t.join();
        }
        if (failed.load()) throw CampaignError(error_text);

        int successes = 0;
        for (const auto& t : vr.trials) successes += t.success ? 1 : 0;
        vr.success_rate = static_cast<double>(successes) / cfg.trials;
        attack.variants.push_back(std::move(vr));
      }
      for (const auto& vr : attack.variants)
        if (vr.encoding == corpus::Encoding::kPlaintext) {
          attack.success_rate = vr.success_rate;
          break;
        }
      if (!attack.variants.empty() && attack.variants[0].encoding == corpus::Encoding::kHex)
        attack.success_rate = attack.variants[0].success_rate;
    } catch (const std::exception& e) {
      attack.errored = true;
      attack.error = e.what();
      report.any_errored = true;
    }
    // Attacks offering no variant under the requested encoding are out of
    // the campaign's scope, not zero-rate rows.
    if (!attack.errored && attack.variants.empty()) continue;
    report.attacks.push_back(std::move(attack));
  }

  // Efficacy over measured S and catalogued L/I/D, when >= 2 attacks ran.
  std::vector<scoring::MetricsRecord> rows;
  for (const auto& attack : report.attacks) {
    if (attack.errored) continue;
    const auto& spec = corpus::Registry::instance().at(attack.attack_id);
    if (!spec.metrics) continue;
    scoring::MetricsRecord r = *spec.metrics;
    r.success_rate = attack.success_rate;
    rows.push_back(std::move(r));
  }
  if (rows.size() >= 2) {
    try {
      report.efficacy = scoring::compute_efficacy(rows);
      report.efficacy_inputs = rows;
    } catch (const scoring::ScoringError& e) {
      report.efficacy_note = e.what();  // e.g. every indicator constant
    }
  } else {
    report.efficacy_note = "efficacy needs at least 2 scored attacks";
  }
  return report;
}

inline json report_to_json(const CampaignReport& report, const CampaignConfig& cfg,
                           const std::string& timestamp) {
  json attacks = json::array();
  for (const auto& a : report.attacks) {
    json variants = json::array();
    for (const auto& v : a.variants) {
      json trials = json::array();
      for (const auto& t : v.trials) {
        trials.push_back(json{{"seed", t.seed},
                              {"success", t.success},
                              {"truncated", t.truncated},
                              {"confirmations_requested", t.confirmations_requested},
                              {"confirmations_approved", t.confirmations_approved},
                              {"events", t.sandbox.log().size()}});
      }
      variants.push_back(json{{"variant_id", v.variant_id},
                              {"encoding", corpus::to_string(v.encoding)},
                              {"success_rate", v.success_rate},
                              {"trials", std::move(trials)}});
    }
    json entry{{"id", a.attack_id}, {"errored", a.errored}};
    if (a.errored) entry["error"] = a.error;
    entry["success_rate"] = a.success_rate;
    entry["variants"] = std::move(variants);
    attacks.push_back(std::move(entry));
  }
  json out{{"schema_version", 1},
           {"generated_at", timestamp},
           {"config",
            json{{"variants", cfg.variants == VariantSelection::kPlaintext ? "plaintext"
                              : cfg.variants == VariantSelection::kHex     ? "hex"
                                                                            : "both"},
                 {"trials", cfg.trials},
                 {"seed", cfg.base_seed},
                 {"transport", to_string(cfg.transport)}}},
           {"catalogue_version", report.catalogue_version},
           {"profile", report.profile_echo},
           {"attacks", std::move(attacks)}};
  if (report.efficacy)
    out["efficacy"] = scoring::efficacy_to_json(report.efficacy_inputs, *report.efficacy);
  else if (!report.efficacy_note.empty())
    out["efficacy_note"] = report.efficacy_note;
  return out;
}

inline std::string report_table_text(const json& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-38s %-12s %9s %7s\n", "Attack", "Variant", "S", "Trials");
  out += line;
  out += std::string(70, '-') + "\n";
  for (const auto& a : report.at("attacks")) {
    if (a.value("errored", false)) {
      std::snprintf(line, sizeof line, "%-38s %-12s %9s\n", a["id"].get<std::string>().c_str(),
                    "-", "ERROR");
      out += line;
      continue;
    }
    for (const auto& v : a.at("variants")) {
      std::snprintf(line, sizeof line, "%-38s %-12s %8.0f%% %7zu\n",
                    a["id"].get<std::string>().c_str(),
                    v["variant_id"].get<std::string>().c_str(),
                    v["success_rate"].get<double>() * 100.0, v.at("trials").size());
      out += line;
    }
  }
  return out;
}

}  // namespace mcpsec::campaign
