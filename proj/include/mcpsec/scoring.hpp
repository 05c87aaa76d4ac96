#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcpsec/protocol.hpp"

namespace mcpsec::scoring {

struct ScoringError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One attack's measured and catalogued indicators: success rate in [0,1],
// risk level 1..7, persistent impact 1..2, implementation difficulty 1..3.
struct MetricsRecord {
  std::string attack_id;
  double success_rate = 0.0;  // S
  int risk_level = 1;         // L
  int impact = 1;             // I
  int difficulty = 1;         // D
};

inline void validate(const MetricsRecord& r) {
  if (r.success_rate < 0.0 || r.success_rate > 1.0)
    throw ScoringError(r.attack_id + ": success rate outside [0,1]");
  if (r.risk_level < 1 || r.risk_level > 7)
    throw ScoringError(r.attack_id + ": risk level outside 1..7");
  if (r.impact < 1 || r.impact > 2) throw ScoringError(r.attack_id + ": impact outside 1..2");
  if (r.difficulty < 1 || r.difficulty > 3)
    throw ScoringError(r.attack_id + ": difficulty outside 1..3");
}

inline constexpr std::size_t kColumns = 4;  // S, L, I, D
inline constexpr std::array<const char*, kColumns> kColumnNames = {"S", "L", "I", "D"};
// S, L, I are benefit indicators; D is a cost indicator (harder = lower).
inline constexpr std::array<bool, kColumns> kBenefit = {true, true, true, false};

using Matrix = std::vector<std::array<double, kColumns>>;

struct PipelineResult {
  std::vector<std::string> ids;
  Matrix normalized;                          // x'
  Matrix proportions;                         // P
  std::array<bool, kColumns> degenerate{};    // constant input columns
  std::array<double, kColumns> entropy{};     // e_j (1 for degenerate)
  std::array<double, kColumns> weights{};     // w_j, sums to 1
  std::vector<double> raw;                    // weighted sums in [0,1]
  std::vector<double> display;                // anchored so max -> 10.00
};

inline Matrix to_matrix(const std::vector<MetricsRecord>& records) {
  Matrix m;
  m.reserve(records.size());
  for (const auto& r : records)
    m.push_back({r.success_rate, static_cast<double>(r.risk_level),
                 static_cast<double>(r.impact), static_cast<double>(r.difficulty)});
  return m;
}

// Min-max normalization. Benefit columns: (x - min)/(max - min); cost
// columns direction-corrected: (max - x)/(max - min). Constant columns
// normalize to all zeros and are flagged degenerate.
inline Matrix normalize(const Matrix& input, std::array<bool, kColumns>* degenerate_out = nullptr) {
  const std::size_t n = input.size();
  if (n < 2) throw ScoringError("normalization requires at least 2 rows");
  Matrix out(n);
  std::array<bool, kColumns> degenerate{};
  for (std::size_t j = 0; j < kColumns; ++j) {
    double lo = input[0][j];
    double hi = input[0][j];
    for (const auto& row : input) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    if (hi == lo) {
      degenerate[j] = true;
      for (std::size_t i = 0; i < n; ++i) out[i][j] = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i)
      out[i][j] = kBenefit[j] ? (input[i][j] - lo) / (hi - lo) : (hi - input[i][j]) / (hi - lo);
  }
  if (degenerate_out) *degenerate_out = degenerate;
  return out;
}

// Column-wise proportions P_ij = x'_ij / sum_i x'_ij; degenerate columns
// are skipped (left all-zero).
inline Matrix proportion_matrix(const Matrix& normalized,
                                const std::array<bool, kColumns>& degenerate) {
  const std::size_t n = normalized.size();
  Matrix p(n);
  for (auto& row : p) row.fill(0.0);
  for (std::size_t j = 0; j < kColumns; ++j) {
    if (degenerate[j]) continue;
    double sum = 0.0;
    for (const auto& row : normalized) sum += row[j];
    if (sum <= 0.0) throw ScoringError("non-degenerate column with non-positive sum");
    for (std::size_t i = 0; i < n; ++i) p[i][j] = normalized[i][j] / sum;
  }
  return p;
}

// e_j = -(1/ln n) * sum_i P_ij ln P_ij, with 0*ln 0 := 0. Degenerate
// columns carry no information and get e_j = 1.
inline std::array<double, kColumns> entropy(const Matrix& proportions,
                                            const std::array<bool, kColumns>& degenerate) {
  const std::size_t n = proportions.size();
  if (n < 2) throw ScoringError("entropy requires at least 2 rows");
  std::array<double, kColumns> e{};
  const double inv_ln_n = 1.0 / std::log(static_cast<double>(n));
  for (std::size_t j = 0; j < kColumns; ++j) {
    if (degenerate[j]) {
      e[j] = 1.0;
      continue;
    }
    double acc = 0.0;
    for (const auto& row : proportions)
      if (row[j] > 0.0) acc += row[j] * std::log(row[j]);
    e[j] = -inv_ln_n * acc;
  }
  return e;
}

// w_j = (1 - e_j) / sum_k (1 - e_k). All-uninformative input is an error.
inline std::array<double, kColumns> weights(const std::array<double, kColumns>& e) {
  double total = 0.0;
  for (double ej : e) total += 1.0 - ej;
  if (total <= 0.0) throw ScoringError("no discriminating column: all entropies are 1");
  std::array<double, kColumns> w{};
  for (std::size_t j = 0; j < kColumns; ++j) w[j] = (1.0 - e[j]) / total;
  return w;
}

inline std::vector<double> weighted_scores(const Matrix& normalized,
                                           const std::array<double, kColumns>& w) {
  std::vector<double> raw;
  raw.reserve(normalized.size());
  for (const auto& row : normalized) {
    double s = 0.0;
    for (std::size_t j = 0; j < kColumns; ++j) s += w[j] * row[j];
    raw.push_back(s);
  }
  return raw;
}

// Display scale: a single multiplicative factor anchoring the maximum raw
// score to exactly 10.0 (every row attaining the maximum is pinned, so
// ties stay ties). Ranking is preserved.
inline std::vector<double> display_scores(const std::vector<double>& raw) {
  double max_raw = 0.0;
  for (double r : raw) max_raw = std::max(max_raw, r);
  std::vector<double> out;
  out.reserve(raw.size());
  if (max_raw <= 0.0) {
    out.assign(raw.size(), 0.0);
    return out;
  }
  for (double r : raw) out.push_back(r == max_raw ? 10.0 : 10.0 * r / max_raw);
  return out;
}

inline PipelineResult compute_efficacy(const std::vector<MetricsRecord>& records) {
  if (records.size() < 2) throw ScoringError("efficacy requires at least 2 attacks");
  for (const auto& r : records) validate(r);
  PipelineResult result;
  for (const auto& r : records) result.ids.push_back(r.attack_id);
  Matrix input = to_matrix(records);
  result.normalized = normalize(input, &result.degenerate);
  result.proportions = proportion_matrix(result.normalized, result.degenerate);
  result.entropy = entropy(result.proportions, result.degenerate);
  result.weights = weights(result.entropy);
  result.raw = weighted_scores(result.normalized, result.weights);
  result.display = display_scores(result.raw);
  return result;
}

// ---------------------------------------------------------------------------
// Ingest / export

// Ingest format: JSON array of {attack_id, S, L, I, D}; S accepts either a
// fraction in [0,1] or a percentage string like "90%".
inline std::vector<MetricsRecord> metrics_from_json(const json& j) {
  if (!j.is_array()) throw ScoringError("metrics document must be a JSON array");
  std::vector<MetricsRecord> records;
  for (const auto& row : j) {
    MetricsRecord r;
    r.attack_id = row.at("attack_id").get<std::string>();
    const json& s = row.at("S");
    if (s.is_string()) {
      std::string text = s.get<std::string>();
      if (!text.empty() && text.back() == '%') text.pop_back();
      r.success_rate = std::stod(text) / 100.0;
    } else {
      r.success_rate = s.get<double>();
    }
    r.risk_level = row.at("L").get<int>();
    r.impact = row.at("I").get<int>();
    r.difficulty = row.at("D").get<int>();
    validate(r);
    records.push_back(std::move(r));
  }
  return records;
}

inline json efficacy_to_json(const std::vector<MetricsRecord>& records,
                             const PipelineResult& result) {
  json weights_obj = json::object();
  json entropy_obj = json::object();
  json degenerate = json::array();
  for (std::size_t j = 0; j < kColumns; ++j) {
    weights_obj[kColumnNames[j]] = result.weights[j];
    entropy_obj[kColumnNames[j]] = result.entropy[j];
    if (result.degenerate[j]) degenerate.push_back(kColumnNames[j]);
  }
  json rows = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back(json{{"attack_id", records[i].attack_id},
                        {"S", records[i].success_rate},
                        {"L", records[i].risk_level},
                        {"I", records[i].impact},
                        {"D", records[i].difficulty},
                        {"raw", result.raw[i]},
                        {"display", result.display[i]}});
  }
  return json{{"weights", weights_obj},
              {"entropy", entropy_obj},
              {"degenerate_columns", degenerate},
              {"rows", rows}};
}

// Aligned text table; display values rounded to two decimals here only.
inline std::string efficacy_table_text(const std::vector<MetricsRecord>& records,
                                       const PipelineResult& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-38s %6s %3s %3s %3s %9s\n", "Attack", "S", "L", "I", "D",
                "Efficacy");
  out += line;
  out += std::string(66, '-') + "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::snprintf(line, sizeof line, "%-38s %5.0f%% %3d %3d %3d %9.2f\n",
                  records[i].attack_id.c_str(), records[i].success_rate * 100.0,
                  records[i].risk_level, records[i].impact, records[i].difficulty,
                  result.display[i]);
    out += line;
  }
  std::snprintf(line, sizeof line, "weights: S=%.4f L=%.4f I=%.4f D=%.4f\n", result.weights[0],
                result.weights[1], result.weights[2], result.weights[3]);
  out += line;
  return out;
}

}  // namespace mcpsec::scoring
