// mcpsec: campaign runner and report emitter for the MCP security harness.
//
// Verbs: list, run, campaign, score, serve, report.
// Exit codes: 0 clean; 1 campaign had errored attacks; 2 usage/config
// error; 3 non-executable attack requested.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mcpsec/campaign.hpp"
#include "mcpsec/corpus.hpp"
#include "mcpsec/profiles.hpp"
#include "mcpsec/scoring.hpp"
#include "mcpsec/transport.hpp"

namespace {

using mcpsec::json;

std::string self_path() {
  char buf[4096];
  ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n <= 0) return "mcpsec";
  buf[n] = '\0';
  return std::string(buf);
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return json::parse(buf.str());
}

int cmd_list(const std::string& category, bool executable_only, bool as_json,
             const std::string& out_path) {
  std::optional<mcpsec::corpus::Category> filter;
  if (!category.empty()) {
    filter = mcpsec::corpus::category_from_string(category);
    if (!filter) {
      std::cerr << "unknown category: " << category << "\n";
      return 2;
    }
  }
  if (as_json || !out_path.empty()) {
    // Machine-readable catalogue manifest; filters do not apply.
    std::string doc = mcpsec::corpus::Registry::instance().catalogue_json().dump(2) + "\n";
    if (!out_path.empty()) write_text_file(out_path, doc);
    else std::cout << doc;
    return 0;
  }
  int rows = 0;
  for (const auto* spec : mcpsec::corpus::Registry::instance().ordered()) {
    if (filter && spec->category != *filter) continue;
    if (executable_only && !spec->executable) continue;
    std::printf("%-38s %-15s %-12s %s\n", spec->id.c_str(),
                mcpsec::corpus::to_string(spec->category),
                spec->executable ? "executable" : "catalogue",
                spec->title.c_str());
    ++rows;
  }
  std::printf("%d attacks\n", rows);
  return 0;
}

int cmd_run(const std::string& attack_id, const std::string& variant_id,
            const std::string& profile_name, int trials, std::uint64_t seed,
            const std::string& transport, const std::string& out_dir) {
  auto profile = mcpsec::agent::resolve_profile(profile_name);
  auto mode = transport == "stdio" ? mcpsec::campaign::TransportMode::kStdio
                                   : mcpsec::campaign::TransportMode::kInProcess;
  std::string scratch = out_dir;
  if (scratch.empty()) {
    if (const char* env = std::getenv("MCPSEC_SCRATCH_DIR")) scratch = env;
  }
  int successes = 0;
  for (int k = 0; k < trials; ++k) {
    auto variant = mcpsec::corpus::build_variant(attack_id, variant_id);
    auto outcome = mcpsec::campaign::run_trial(attack_id, variant, profile,
                                               seed + static_cast<std::uint64_t>(k), mode,
                                               self_path());
    successes += outcome.success ? 1 : 0;
    std::printf("trial %2d seed %llu: %s (%zu events, %d confirmations%s)\n", k + 1,
                static_cast<unsigned long long>(outcome.seed),
                outcome.success ? "attack succeeded" : "attack failed",
                outcome.sandbox.log().size(), outcome.confirmations_requested,
                outcome.truncated ? ", truncated" : "");
    if (!scratch.empty()) {
      std::filesystem::create_directories(scratch);
      std::string path = scratch + "/" + attack_id + "-" + variant_id + "-seed" +
                         std::to_string(outcome.seed) + ".json";
      write_text_file(path, outcome.sandbox.log().to_json().dump(2) + "\n");
    }
  }
  std::printf("success rate: %.2f (%d/%d)\n", static_cast<double>(successes) / trials, successes,
              trials);
  return 0;  // attack success is data, not an error
}

int cmd_campaign(const std::string& config_path, const std::string& out_path,
                 const std::string& table_path, const std::string& profile_flag,
                 int trials_flag, std::uint64_t seed_flag, const std::string& variants_flag,
                 const std::string& transport_flag, const std::string& category_flag,
                 int jobs_flag) {
  mcpsec::campaign::CampaignConfig cfg;
  if (!config_path.empty())
    cfg = mcpsec::campaign::campaign_config_from_json(read_json_file(config_path));
  if (!profile_flag.empty()) cfg.profile_name = profile_flag;
  if (trials_flag > 0) cfg.trials = trials_flag;
  if (seed_flag > 0) cfg.base_seed = seed_flag;
  if (!variants_flag.empty()) {
    if (variants_flag == "plaintext") cfg.variants = mcpsec::campaign::VariantSelection::kPlaintext;
    else if (variants_flag == "hex") cfg.variants = mcpsec::campaign::VariantSelection::kHex;
    else if (variants_flag == "both") cfg.variants = mcpsec::campaign::VariantSelection::kBoth;
    else throw mcpsec::campaign::CampaignError("variants must be plaintext, hex, or both");
  }
  if (!transport_flag.empty()) {
    if (transport_flag == "inproc") cfg.transport = mcpsec::campaign::TransportMode::kInProcess;
    else if (transport_flag == "stdio") cfg.transport = mcpsec::campaign::TransportMode::kStdio;
    else throw mcpsec::campaign::CampaignError("transport must be inproc or stdio");
  }
  if (!category_flag.empty()) {
    auto c = mcpsec::corpus::category_from_string(category_flag);
    if (!c) throw mcpsec::campaign::CampaignError("unknown category: " + category_flag);
    cfg.category = c;
  }
  if (jobs_flag > 0) cfg.jobs = jobs_flag;
  cfg.cli_path = self_path();

  auto report = mcpsec::campaign::run_campaign(cfg);
  json doc = mcpsec::campaign::report_to_json(report, cfg, utc_timestamp());
  std::string table = mcpsec::campaign::report_table_text(doc);
  std::cout << table;
  if (report.efficacy)
    std::cout << "\n"
              << mcpsec::scoring::efficacy_table_text(report.efficacy_inputs, *report.efficacy);
  if (!out_path.empty()) write_text_file(out_path, doc.dump(2) + "\n");
  if (!table_path.empty()) write_text_file(table_path, table);
  return report.any_errored ? 1 : 0;
}

int cmd_score(const std::string& metrics_path, const std::string& out_path) {
  auto records = mcpsec::scoring::metrics_from_json(read_json_file(metrics_path));
  if (records.size() < 2) {
    std::cerr << "scoring requires at least 2 metric rows\n";
    return 2;
  }
  auto result = mcpsec::scoring::compute_efficacy(records);
  std::cout << mcpsec::scoring::efficacy_table_text(records, result);
  for (std::size_t j = 0; j < mcpsec::scoring::kColumns; ++j)
    if (result.degenerate[j])
      std::cout << "note: column " << mcpsec::scoring::kColumnNames[j]
                << " is constant; weight 0\n";
  if (!out_path.empty())
    write_text_file(out_path, mcpsec::scoring::efficacy_to_json(records, result).dump(2) + "\n");
  return 0;
}

int cmd_serve(const std::string& attack_id, const std::string& variant_id, int server_index) {
  auto variant = mcpsec::corpus::build_variant(attack_id, variant_id);
  if (server_index < 0 || static_cast<std::size_t>(server_index) >= variant.servers.size()) {
    std::cerr << "server index out of range (variant has " << variant.servers.size()
              << " servers)\n";
    return 2;
  }
  mcpsec::protocol::Server server(variant.servers[static_cast<std::size_t>(server_index)]);
  mcpsec::protocol::StdioTransport transport;
  return server.serve(transport);
}

int cmd_report(const std::string& report_path) {
  json doc = read_json_file(report_path);
  std::cout << mcpsec::campaign::report_table_text(doc);
  if (doc.contains("efficacy")) {
    const json& eff = doc["efficacy"];
    std::printf("\n%-38s %9s %9s\n", "Attack", "raw", "display");
    for (const auto& row : eff.at("rows"))
      std::printf("%-38s %9.4f %9.2f\n", row["attack_id"].get<std::string>().c_str(),
                  row["raw"].get<double>(), row["display"].get<double>());
    const json& w = eff.at("weights");
    std::printf("weights: S=%.4f L=%.4f I=%.4f D=%.4f\n", w["S"].get<double>(),
                w["L"].get<double>(), w["I"].get<double>(), w["D"].get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCP security test harness: attack catalogue, seeded trials, efficacy scoring"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the attack catalogue");
  std::string list_category, list_out;
  bool list_executable_only = false;
  bool list_json = false;
  list->add_option("--category", list_category, "Filter by category");
  list->add_flag("--executable-only", list_executable_only, "Only attacks with payloads");
  list->add_flag("--json", list_json, "Emit the catalogue manifest as JSON");
  list->add_option("--out", list_out, "Write the JSON manifest to a file");

  auto* run = app.add_subcommand("run", "Run seeded trials of one attack");
  std::string run_attack, run_variant = "default", run_profile = "paperlike";
  std::string run_transport = "inproc", run_out;
  int run_trials = 10;
  std::uint64_t run_seed = 1;
  run->add_option("attack", run_attack, "Attack id")->required();
  run->add_option("--variant", run_variant, "Variant id (default: default)");
  run->add_option("--profile", run_profile, "Profile name or JSON file");
  run->add_option("--trials", run_trials, "Trials to run")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "Base seed (trial k uses seed+k)");
  run->add_option("--transport", run_transport, "inproc or stdio");
  run->add_option("--out", run_out, "Directory for per-trial event logs");

  auto* campaign = app.add_subcommand("campaign", "Run an attack matrix and score it");
  std::string campaign_config, campaign_out, campaign_table, campaign_profile,
      campaign_variants, campaign_transport, campaign_category;
  int campaign_trials = 0, campaign_jobs = 0;
  std::uint64_t campaign_seed = 0;
  campaign->add_option("config", campaign_config, "Campaign config JSON");
  campaign->add_option("--out", campaign_out, "Report JSON output path");
  campaign->add_option("--table", campaign_table, "Text table output path");
  campaign->add_option("--profile", campaign_profile, "Profile name or JSON file");
  campaign->add_option("--trials", campaign_trials, "Trials per attack");
  campaign->add_option("--seed", campaign_seed, "Base seed");
  campaign->add_option("--variants", campaign_variants, "plaintext, hex, or both");
  campaign->add_option("--transport", campaign_transport, "inproc or stdio");
  campaign->add_option("--category", campaign_category, "Category filter");
  campaign->add_option("--jobs", campaign_jobs, "Worker threads");

  auto* score = app.add_subcommand("score", "Score a metrics file");
  std::string score_metrics, score_out;
  score->add_option("metrics", score_metrics, "Metrics JSON file")->required();
  score->add_option("--out", score_out, "Efficacy JSON output path");

  auto* serve = app.add_subcommand("serve", "Serve a corpus attack server on stdio");
  std::string serve_attack, serve_variant = "default";
  int serve_index = 0;
  serve->add_option("attack", serve_attack, "Attack id")->required();
  serve->add_option("variant", serve_variant, "Variant id");
  serve->add_option("--server-index", serve_index, "Which server of the variant");

  auto* report = app.add_subcommand("report", "Render a stored report JSON as a table");
  std::string report_path;
  report->add_option("report", report_path, "Report JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) return cmd_list(list_category, list_executable_only, list_json, list_out);
    if (run->parsed())
      return cmd_run(run_attack, run_variant, run_profile, run_trials, run_seed, run_transport,
                     run_out);
    if (campaign->parsed())
      return cmd_campaign(campaign_config, campaign_out, campaign_table, campaign_profile,
                          campaign_trials, campaign_seed, campaign_variants, campaign_transport,
                          campaign_category, campaign_jobs);
    if (score->parsed()) return cmd_score(score_metrics, score_out);
    if (serve->parsed()) return cmd_serve(serve_attack, serve_variant, serve_index);
    if (report->parsed()) return cmd_report(report_path);
  } catch (const mcpsec::corpus::NotExecutableError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
