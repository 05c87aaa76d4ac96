#include "mcpsec/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "mcpsec/agent.hpp"
#include "mcpsec/corpus.hpp"
#include "oracle_scoring.hpp"

using namespace mcpsec;
using namespace mcpsec::scoring;

namespace {

std::vector<MetricsRecord> catalogue_metrics() {
  std::ifstream in(std::string(MCPSEC_SOURCE_DIR) + "/data/catalogue_metrics.json");
  std::stringstream buf;
  buf << in.rdbuf();
  return metrics_from_json(json::parse(buf.str()));
}

Matrix column_matrix(const std::vector<double>& col) {
  // Embeds one column as the S column with fixed benign companions so the
  // per-column operations can be probed in isolation.
  Matrix m;
  for (double v : col) m.push_back({v, 0.0, 0.0, 0.0});
  return m;
}

std::vector<MetricsRecord> random_records(agent::Rng& rng, std::size_t n) {
  std::vector<MetricsRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    MetricsRecord r;
    r.attack_id = "attack-" + std::to_string(i);
    r.success_rate = static_cast<double>(rng.next() % 101) / 100.0;
    r.risk_level = 1 + static_cast<int>(rng.next() % 7);
    r.impact = 1 + static_cast<int>(rng.next() % 2);
    r.difficulty = 1 + static_cast<int>(rng.next() % 3);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

TEST(Normalize, BenefitAndCostEndpoints) {
  Matrix input = {{1, 1, 1, 1}, {2, 1, 1, 2}, {3, 1, 1, 3}};
  std::array<bool, kColumns> degenerate{};
  Matrix out = normalize(input, &degenerate);
  EXPECT_DOUBLE_EQ(out[0][0], 0.0);
  EXPECT_DOUBLE_EQ(out[1][0], 0.5);
  EXPECT_DOUBLE_EQ(out[2][0], 1.0);
  // Cost column runs the other way: harder (larger D) scores lower.
  EXPECT_DOUBLE_EQ(out[0][3], 1.0);
  EXPECT_DOUBLE_EQ(out[1][3], 0.5);
  EXPECT_DOUBLE_EQ(out[2][3], 0.0);
  EXPECT_TRUE(degenerate[1]);
  EXPECT_TRUE(degenerate[2]);
  EXPECT_DOUBLE_EQ(out[0][1], 0.0);
  EXPECT_DOUBLE_EQ(out[2][2], 0.0);
}

TEST(Normalize, RequiresTwoRows) {
  Matrix one = {{1, 2, 1, 1}};
  EXPECT_THROW(normalize(one), ScoringError);
}

TEST(Proportions, DirectArithmetic) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  Matrix x = column_matrix({0.0, 0.5, 1.0});
  Matrix p = proportion_matrix(x, degenerate);
  EXPECT_DOUBLE_EQ(p[0][0], 0.0);
  EXPECT_NEAR(p[1][0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[2][0], 2.0 / 3.0, 1e-15);
}

TEST(Proportions, UniformColumnGivesEqualShares) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  Matrix p = proportion_matrix(column_matrix({0.7, 0.7, 0.7}), degenerate);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i][0], 1.0 / 3.0, 1e-15);
}

TEST(Proportions, SinglePositiveEntryTakesAll) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  Matrix p = proportion_matrix(column_matrix({0.0, 0.0, 0.9}), degenerate);
  EXPECT_DOUBLE_EQ(p[0][0], 0.0);
  EXPECT_DOUBLE_EQ(p[1][0], 0.0);
  EXPECT_DOUBLE_EQ(p[2][0], 1.0);
}

TEST(Entropy, UniformColumnIsExactlyOne) {
  for (std::size_t n : {3u, 5u, 27u, 100u}) {
    std::array<bool, kColumns> degenerate{false, true, true, true};
    Matrix p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({1.0 / static_cast<double>(n), 0, 0, 0});
    auto e = entropy(p, degenerate);
    EXPECT_NEAR(e[0], 1.0, 1e-12) << n;
  }
}

TEST(Entropy, SingleMassIsZero) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  Matrix p = {{1.0, 0, 0, 0}, {0.0, 0, 0, 0}, {0.0, 0, 0, 0}};
  auto e = entropy(p, degenerate);
  EXPECT_NEAR(e[0], 0.0, 1e-12);
}

TEST(Entropy, HalfHalfZeroIsLogTwoOverLogThree) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  Matrix p = {{0.5, 0, 0, 0}, {0.5, 0, 0, 0}, {0.0, 0, 0, 0}};
  auto e = entropy(p, degenerate);
  EXPECT_NEAR(e[0], std::log(2.0) / std::log(3.0), 1e-12);
}

TEST(Entropy, DegenerateColumnGetsOne) {
  std::array<bool, kColumns> degenerate{false, true, true, true};
  auto e = entropy(column_matrix({0.2, 0.3, 0.5}), degenerate);
  EXPECT_DOUBLE_EQ(e[1], 1.0);
  EXPECT_DOUBLE_EQ(e[2], 1.0);
  EXPECT_DOUBLE_EQ(e[3], 1.0);
}

TEST(Weights, DirectArithmetic) {
  auto w = weights({0.5, 0.5, 0.5, 1.0});
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[2], 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(w[3], 0.0);

  auto w2 = weights({0.0, 1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(w2[0], 1.0);
  EXPECT_DOUBLE_EQ(w2[1], 0.0);
}

TEST(Weights, AllUninformativeIsError) {
  EXPECT_THROW(weights({1.0, 1.0, 1.0, 1.0}), ScoringError);
}

TEST(Pipeline, CatalogueMetricsMatchRegistryMetrics) {
  auto file_rows = catalogue_metrics();
  ASSERT_EQ(file_rows.size(), 27u);
  std::map<std::string, MetricsRecord> by_id;
  for (const auto& r : file_rows) by_id[r.attack_id] = r;
  for (const auto& [id, spec] : corpus::registry_load()) {
    if (!spec.executable) continue;
    ASSERT_TRUE(by_id.count(id)) << id;
    EXPECT_EQ(by_id[id].success_rate, spec.metrics->success_rate) << id;
    EXPECT_EQ(by_id[id].risk_level, spec.metrics->risk_level) << id;
    EXPECT_EQ(by_id[id].impact, spec.metrics->impact) << id;
    EXPECT_EQ(by_id[id].difficulty, spec.metrics->difficulty) << id;
  }
}

TEST(Pipeline, CatalogueWeightsMatchFrozenReference) {
  // Reference values frozen from the standalone recomputation of the
  // catalogue's 27-row matrix.
  auto result = compute_efficacy(catalogue_metrics());
  EXPECT_NEAR(result.entropy[0], 0.951530622579, 1e-9);
  EXPECT_NEAR(result.entropy[1], 0.923731172166, 1e-9);
  EXPECT_NEAR(result.entropy[2], 0.893381286415, 1e-9);
  EXPECT_NEAR(result.entropy[3], 0.923712121825, 1e-9);
  EXPECT_NEAR(result.weights[0], 0.157549803837, 1e-9);
  EXPECT_NEAR(result.weights[1], 0.247911970474, 1e-9);
  EXPECT_NEAR(result.weights[2], 0.346564332046, 1e-9);
  EXPECT_NEAR(result.weights[3], 0.247973893643, 1e-9);
}

TEST(Pipeline, MaxRowIsSqlApiTheftAtExactlyTen) {
  auto records = catalogue_metrics();
  auto result = compute_efficacy(records);
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < result.raw.size(); ++i)
    if (result.raw[i] > result.raw[argmax]) argmax = i;
  EXPECT_EQ(records[argmax].attack_id, "llm.sql-api-theft");
  EXPECT_EQ(result.display[argmax], 10.0);  // exact anchoring
  EXPECT_NEAR(result.raw[argmax], 0.958681338254, 1e-9);
}

TEST(Pipeline, IdenticalMetricRowsGetIdenticalScores) {
  auto records = catalogue_metrics();
  auto result = compute_efficacy(records);
  std::map<std::string, double> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) by_id[records[i].attack_id] = result.display[i];
  // (0.80, 3, 1, 2) appears three times in the catalogue.
  EXPECT_EQ(by_id["direct.single.rug-pull"], by_id["direct.single.command-injection"]);
  EXPECT_EQ(by_id["direct.single.rug-pull"], by_id["indirect.webpage-poison"]);
  // (1.00, 3, 2, 1) appears four times.
  EXPECT_EQ(by_id["direct.single.file-addition"], by_id["direct.single.file-modification"]);
  EXPECT_EQ(by_id["direct.single.file-addition"], by_id["direct.multi.coverage"]);
  EXPECT_EQ(by_id["direct.single.file-addition"], by_id["direct.multi.forced-execution"]);
}

TEST(Pipeline, MatchesIndependentOracleOnCatalogue) {
  auto records = catalogue_metrics();
  auto result = compute_efficacy(records);
  std::vector<std::vector<double>> rows;
  for (const auto& r : records)
    rows.push_back({r.success_rate, static_cast<double>(r.risk_level),
                    static_cast<double>(r.impact), static_cast<double>(r.difficulty)});
  auto expected = oracle::entropy_weight_scores(rows);
  for (std::size_t j = 0; j < kColumns; ++j) {
    EXPECT_NEAR(result.entropy[j], expected.entropy[j], 1e-12);
    EXPECT_NEAR(result.weights[j], expected.weights[j], 1e-12);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_NEAR(result.raw[i], expected.raw[i], 1e-12);
    EXPECT_NEAR(result.display[i], expected.display[i], 1e-11);
  }
}

TEST(Pipeline, MatchesOracleOnRandomMatrices) {
  agent::Rng rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    auto records = random_records(rng, 5);
    std::vector<std::vector<double>> rows;
    for (const auto& r : records)
      rows.push_back({r.success_rate, static_cast<double>(r.risk_level),
                      static_cast<double>(r.impact), static_cast<double>(r.difficulty)});
    PipelineResult result;
    oracle::Result expected;
    bool lib_threw = false, oracle_threw = false;
    try {
      result = compute_efficacy(records);
    } catch (const ScoringError&) {
      lib_threw = true;
    }
    try {
      expected = oracle::entropy_weight_scores(rows);
    } catch (const std::invalid_argument&) {
      oracle_threw = true;
    }
    ASSERT_EQ(lib_threw, oracle_threw);
    if (lib_threw) continue;
    for (std::size_t j = 0; j < kColumns; ++j)
      ASSERT_NEAR(result.weights[j], expected.weights[j], 1e-12);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double scale = std::max(1.0, std::abs(expected.raw[i]));
      ASSERT_NEAR(result.raw[i], expected.raw[i], 1e-12 * scale);
    }
  }
}

TEST(Pipeline, WeightsOnSimplexForRandomMatrices) {
  agent::Rng rng(7);
  int checked = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    auto records = random_records(rng, 4 + static_cast<std::size_t>(rng.next() % 8));
    try {
      auto result = compute_efficacy(records);
      double sum = 0.0;
      for (double w : result.weights) {
        EXPECT_GE(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      ++checked;
    } catch (const ScoringError&) {
      // all-constant random draw; legitimately rejected
    }
  }
  EXPECT_GT(checked, 900);
}

TEST(Pipeline, RowPermutationEquivariance) {
  auto records = catalogue_metrics();
  auto base = compute_efficacy(records);
  std::vector<MetricsRecord> rotated(records.begin() + 5, records.end());
  rotated.insert(rotated.end(), records.begin(), records.begin() + 5);
  auto perm = compute_efficacy(rotated);
  for (std::size_t i = 0; i < rotated.size(); ++i) {
    std::size_t orig = (i + 5) % records.size();
    // Summation order changes across runs, so agreement is to FP noise.
    EXPECT_NEAR(perm.raw[i], base.raw[orig], 1e-12);
    EXPECT_NEAR(perm.display[i], base.display[orig], 1e-11);
  }
}

TEST(Pipeline, ConditionalMonotonicityInEachIndicator) {
  // With weights and column ranges held fixed, raising a benefit
  // indicator (or lowering the cost one) never lowers the raw score.
  auto records = catalogue_metrics();
  auto base = compute_efficacy(records);
  auto raw_for = [&](const MetricsRecord& r) {
    Matrix input = to_matrix(records);
    std::array<bool, kColumns> degenerate{};
    Matrix normalized = normalize(input, &degenerate);
    Matrix probe_input = input;
    probe_input[0] = {r.success_rate, static_cast<double>(r.risk_level),
                      static_cast<double>(r.impact), static_cast<double>(r.difficulty)};
    auto probe = normalize(probe_input, &degenerate);
    double s = 0.0;
    for (std::size_t j = 0; j < kColumns; ++j) s += base.weights[j] * probe[0][j];
    return s;
  };
  MetricsRecord mid = records[0];
  mid.success_rate = 0.5;
  mid.risk_level = 3;
  mid.impact = 1;
  mid.difficulty = 2;
  double base_raw = raw_for(mid);
  MetricsRecord up = mid;
  up.success_rate = 0.9;
  EXPECT_GE(raw_for(up), base_raw);
  up = mid;
  up.risk_level = 6;
  EXPECT_GE(raw_for(up), base_raw);
  up = mid;
  up.impact = 2;
  EXPECT_GE(raw_for(up), base_raw);
  up = mid;
  up.difficulty = 1;  // easier attack, cost column inverted
  EXPECT_GE(raw_for(up), base_raw);
}

TEST(Pipeline, DegenerateImpactColumnGetsZeroWeight) {
  std::vector<MetricsRecord> records = {{"a", 0.5, 2, 2, 1}, {"b", 0.7, 3, 2, 2},
                                        {"c", 0.9, 4, 2, 3}};
  auto result = compute_efficacy(records);
  EXPECT_TRUE(result.degenerate[2]);
  EXPECT_DOUBLE_EQ(result.weights[2], 0.0);
  double sum = result.weights[0] + result.weights[1] + result.weights[3];
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Pipeline, FewerThanTwoRowsIsError) {
  std::vector<MetricsRecord> one = {{"a", 0.5, 2, 2, 1}};
  EXPECT_THROW(compute_efficacy(one), ScoringError);
  EXPECT_THROW(compute_efficacy({}), ScoringError);
}

TEST(Ingest, AcceptsFractionsAndPercentStrings) {
  json doc = json::array({json{{"attack_id", "a"}, {"S", 0.9}, {"L", 3}, {"I", 2}, {"D", 1}},
                          json{{"attack_id", "b"}, {"S", "70%"}, {"L", 1}, {"I", 1}, {"D", 2}}});
  auto records = metrics_from_json(doc);
  EXPECT_DOUBLE_EQ(records[0].success_rate, 0.9);
  EXPECT_DOUBLE_EQ(records[1].success_rate, 0.7);
  json bad = json::array({json{{"attack_id", "x"}, {"S", 2.0}, {"L", 3}, {"I", 2}, {"D", 1}}});
  EXPECT_THROW(metrics_from_json(bad), ScoringError);
}

TEST(Export, JsonCarriesWeightsAndBothScores) {
  auto records = catalogue_metrics();
  auto result = compute_efficacy(records);
  json doc = efficacy_to_json(records, result);
  EXPECT_EQ(doc["rows"].size(), 27u);
  EXPECT_TRUE(doc["weights"].contains("S"));
  EXPECT_TRUE(doc["rows"][0].contains("raw"));
  EXPECT_TRUE(doc["rows"][0].contains("display"));
  std::string table = efficacy_table_text(records, result);
  EXPECT_NE(table.find("llm.sql-api-theft"), std::string::npos);
  EXPECT_NE(table.find("10.00"), std::string::npos);
}
