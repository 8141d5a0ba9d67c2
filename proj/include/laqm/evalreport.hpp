// Copyright 2026 The LAQM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAQM_EVALREPORT_HPP_
#define LAQM_EVALREPORT_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace laqm {

// Sample Pearson correlation; inputs must have equal length >= 3 and be
// non-constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Average ranks (ties get the mean of the tied positions), 1-based.
std::vector<double> average_ranks(const std::vector<double>& x);

// Pearson correlation of average-ranked data.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ListeningTestRow {
  std::string item_id;
  std::string condition;
  double subjective_score = 0.0;
  std::string test_path;
  std::string reference_path;
  std::string subgroup;  // optional
};

struct ListeningTestFile {
  std::string test_name;
  std::string scale;  // "mos" (1-5) or "mushra" (0-100)
  std::vector<ListeningTestRow> rows;

  double scale_lo() const { return scale == "mushra" ? 0.0 : 1.0; }
  double scale_hi() const { return scale == "mushra" ? 100.0 : 5.0; }
};

// Delimited text with a declared header; see docs/listening_test_format.md.
// Listener-level columns (listener_*) are averaged into the subjective score
// when no subjective_score column is present.
ListeningTestFile load_listening_test(const std::string& path,
                                      const std::string& test_name,
                                      const std::string& scale);

struct PredictionRecord {
  std::string item_id;
  std::string condition;
  double distance = 0.0;
  std::optional<double> mapped_score;
  std::string mode;
  std::string aggregation;
};

void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

struct CorrelationCell {
  std::optional<double> pcc;   // null when undefined (constant or n < 3)
  std::optional<double> srcc;
  int n_items = 0;
};

struct TestReport {
  std::string test_name;
  CorrelationCell overall;
  std::map<std::string, CorrelationCell> subgroups;
};

struct CorrelationReport {
  std::vector<TestReport> tests;
  CorrelationCell pooled;  // all tests pooled
  nlohmann::json provenance;
};

enum class EvalPooling { kPerItem, kPerCondition };

// Per-test and per-subgroup PCC/SRCC between predictions (mapped score, or
// negated distance when unmapped) and subjective scores. Every test row must
// have a matching prediction keyed by (item_id, condition).
CorrelationReport evaluate(const std::vector<PredictionRecord>& predictions,
                           const std::vector<ListeningTestFile>& tests,
                           EvalPooling pooling = EvalPooling::kPerItem);

nlohmann::json report_to_json(const CorrelationReport& report);
std::string report_to_text(const CorrelationReport& report);

// Delimited scatter data (prediction, subjective, test_name, subgroup); a
// sibling <path>.regression.csv carries per-test least-squares slope and
// intercept.
void export_scatter(const std::vector<PredictionRecord>& predictions,
                    const std::vector<ListeningTestFile>& tests,
                    const std::string& path,
                    std::vector<std::string>* warnings = nullptr);

}  // namespace laqm

#endif  // LAQM_EVALREPORT_HPP_
