#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mcpsec/client.hpp"
#include "mcpsec/protocol.hpp"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = {}) {
  std::string cmd = (env_prefix.empty() ? std::string{} : env_prefix + " ") +
                    std::string(MCPSEC_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  CliResult result;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(CliList, AllRowsAndFilters) {
  auto all = run_cli("list");
  EXPECT_EQ(all.exit_code, 0);
  EXPECT_NE(all.output.find("31 attacks"), std::string::npos);

  auto singles = run_cli("list --category direct-single");
  EXPECT_EQ(singles.exit_code, 0);
  EXPECT_NE(singles.output.find("8 attacks"), std::string::npos);

  auto executable = run_cli("list --executable-only");
  EXPECT_EQ(executable.exit_code, 0);
  EXPECT_NE(executable.output.find("27 attacks"), std::string::npos);

  auto bogus = run_cli("list --category bogus");
  EXPECT_EQ(bogus.exit_code, 2);
}

TEST(CliRun, FullySusceptibleHitsEveryTrial) {
  auto res = run_cli(
      "run direct.single.file-addition --profile fully-susceptible --trials 10 --seed 1");
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_NE(res.output.find("success rate: 1.00 (10/10)"), std::string::npos);
}

TEST(CliRun, HardenedBlocksEveryTrial) {
  auto res = run_cli("run direct.single.file-addition --profile hardened --trials 10 --seed 1");
  EXPECT_EQ(res.exit_code, 0);  // a failed attack is a measurement, not an error
  EXPECT_NE(res.output.find("success rate: 0.00 (0/10)"), std::string::npos);
}

TEST(CliRun, CatalogueOnlyAttackExitsThree) {
  auto res = run_cli("run malicious-user.sandbox-escape");
  EXPECT_EQ(res.exit_code, 3);
}

TEST(CliRun, InvalidProfileExitsTwo) {
  auto res = run_cli("run direct.single.file-addition --profile /nonexistent/profile.json");
  EXPECT_EQ(res.exit_code, 2);
}

TEST(CliRun, ExportsEventLogs) {
  std::string dir = temp_path("mcpsec-cli-logs");
  std::filesystem::remove_all(dir);
  auto res = run_cli("run llm.sql-api-theft --profile fully-susceptible --trials 2 --seed 4 --out " +
                     dir);
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir + "/llm.sql-api-theft-default-seed4.json"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/llm.sql-api-theft-default-seed5.json"));
  std::ifstream in(dir + "/llm.sql-api-theft-default-seed4.json");
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = mcpsec::json::parse(buf.str());
  ASSERT_TRUE(doc.is_array());
  EXPECT_EQ(doc[0]["seq"], 1);
}

TEST(CliScore, CatalogueMetricsAnchorAtTen) {
  std::string out = temp_path("mcpsec-efficacy.json");
  auto res = run_cli("score " + std::string(MCPSEC_SOURCE_DIR) +
                     "/data/catalogue_metrics.json --out " + out);
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_NE(res.output.find("llm.sql-api-theft"), std::string::npos);
  EXPECT_NE(res.output.find("10.00"), std::string::npos);
  std::ifstream in(out);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = mcpsec::json::parse(buf.str());
  EXPECT_EQ(doc["rows"].size(), 27u);
}

TEST(CliScore, FewRowsExitTwo) {
  std::string path = temp_path("mcpsec-one-row.json");
  std::ofstream(path) << R"([{"attack_id":"a","S":0.5,"L":3,"I":2,"D":1}])";
  auto res = run_cli("score " + path);
  EXPECT_EQ(res.exit_code, 2);
}

TEST(CliCampaign, WritesReportAndTable) {
  std::string out = temp_path("mcpsec-report.json");
  std::string table = temp_path("mcpsec-report.txt");
  auto res = run_cli(
      "campaign --profile fully-susceptible --trials 2 --seed 5 --category llm-inherent --out " +
      out + " --table " + table);
  EXPECT_EQ(res.exit_code, 0) << res.output;
  std::ifstream in(out);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = mcpsec::json::parse(buf.str());
  EXPECT_EQ(doc["schema_version"], 1);
  EXPECT_EQ(doc["attacks"].size(), 6u);
  EXPECT_TRUE(doc.contains("efficacy"));
  EXPECT_TRUE(std::filesystem::exists(table));

  auto render = run_cli("report " + out);
  EXPECT_EQ(render.exit_code, 0);
  EXPECT_NE(render.output.find("llm.jailbreak"), std::string::npos);
  EXPECT_NE(render.output.find("weights:"), std::string::npos);
}

TEST(CliCampaign, InvalidConfigExitsTwo) {
  std::string path = temp_path("mcpsec-bad-config.json");
  std::ofstream(path) << R"({"bogus": true})";
  EXPECT_EQ(run_cli("campaign " + path).exit_code, 2);
}

TEST(CliServe, SpeaksStdioFramingUntilEof) {
  using namespace mcpsec::protocol;
  SubprocessTransport transport(
      {MCPSEC_CLI_PATH, "serve", "direct.multi.shadowing", "default"});
  ClientSession session(transport);
  session.initialize();
  auto tools = session.list_tools();
  ASSERT_EQ(tools.size(), 2u);
  EXPECT_EQ(tools[0].name, "send_email");
  EXPECT_EQ(tools[1].name, "weather_helper");
  // The shadowing payload arrives verbatim beside the benign descriptor.
  EXPECT_NE(tools[1].description.find("always call send_email"), std::string::npos);
  transport.close();
  EXPECT_EQ(transport.exit_code(), 0);  // clean end-of-input
}

TEST(CliServe, CatalogueOnlyExitsThree) {
  auto res = run_cli("serve malicious-user.installer-spoofing default < /dev/null");
  EXPECT_EQ(res.exit_code, 3);
}

TEST(CliList, JsonManifestExport) {
  std::string out = temp_path("mcpsec-catalogue.json");
  auto res = run_cli("list --json --out " + out);
  EXPECT_EQ(res.exit_code, 0);
  std::ifstream in(out);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = mcpsec::json::parse(buf.str());
  ASSERT_TRUE(doc.is_array());
  EXPECT_EQ(doc.size(), 31u);
  int executable = 0;
  for (const auto& entry : doc) executable += entry["executable"].get<bool>() ? 1 : 0;
  EXPECT_EQ(executable, 27);
  auto printed = run_cli("list --json");
  EXPECT_EQ(printed.exit_code, 0);
  EXPECT_EQ(mcpsec::json::parse(printed.output).size(), 31u);
}

TEST(CliRun, StdioTransportMatchesInProcessRates) {
  auto stdio = run_cli(
      "run direct.single.file-addition --profile fully-susceptible --trials 3 --seed 2 "
      "--transport stdio");
  EXPECT_EQ(stdio.exit_code, 0) << stdio.output;
  EXPECT_NE(stdio.output.find("success rate: 1.00 (3/3)"), std::string::npos);
}

TEST(CliRun, ScratchDirEnvironmentVariableExportsLogs) {
  std::string dir = temp_path("mcpsec-scratch-env");
  std::filesystem::remove_all(dir);
  auto res = run_cli("run llm.goal-hijack --profile fully-susceptible --trials 1 --seed 8",
                     "MCPSEC_SCRATCH_DIR=" + dir);
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir + "/llm.goal-hijack-default-seed8.json"));
}

TEST(CliUsage, UnknownVerbExitsTwo) {
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("").exit_code, 2);
}
