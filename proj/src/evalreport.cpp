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

#include "laqm/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "laqm/errors.hpp"

using nlohmann::json;

namespace laqm {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw runtime_error("pearson: length mismatch");
  const size_t n = x.size();
  if (n < 3) throw runtime_error("pearson: need at least 3 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw runtime_error("pearson: correlation undefined for constant input");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&x](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    // Positions i..j (0-based) share the average of 1-based ranks i+1..j+1.
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw runtime_error("spearman: length mismatch");
  return pearson(average_ranks(x), average_ranks(y));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  for (auto& f : fields) {
    // Trim surrounding whitespace.
    size_t b = f.find_first_not_of(" \t");
    size_t e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
  }
  return fields;
}

}  // namespace

ListeningTestFile load_listening_test(const std::string& path,
                                      const std::string& test_name,
                                      const std::string& scale) {
  if (scale != "mos" && scale != "mushra") {
    throw config_error("listening test scale must be 'mos' or 'mushra', got '" +
                       scale + "'");
  }
  std::ifstream in(path);
  if (!in) throw runtime_error("cannot open listening test file: " + path);

  ListeningTestFile file;
  file.test_name = test_name;
  file.scale = scale;

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw runtime_error("empty listening test file: " + path);

  auto col = [&header](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end()
               ? -1
               : static_cast<int>(std::distance(header.begin(), it));
  };
  const int c_item = col("item_id");
  const int c_cond = col("condition");
  const int c_score = col("subjective_score");
  const int c_test = col("test_path");
  const int c_ref = col("reference_path");
  const int c_group = col("subgroup");
  std::vector<int> listener_cols;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i].rfind("listener_", 0) == 0) {
      listener_cols.push_back(static_cast<int>(i));
    }
  }
  if (c_item < 0 || c_cond < 0) {
    throw runtime_error("listening test file needs item_id and condition "
                        "columns: " + path);
  }
  if (c_score < 0 && listener_cols.empty()) {
    throw runtime_error("listening test file needs a subjective_score column "
                        "or listener_* columns: " + path);
  }

  std::set<std::pair<std::string, std::string>> seen;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() < header.size()) {
      throw runtime_error(path + " line " + std::to_string(line_no) +
                          ": expected " + std::to_string(header.size()) +
                          " fields");
    }
    ListeningTestRow row;
    row.item_id = fields[static_cast<size_t>(c_item)];
    row.condition = fields[static_cast<size_t>(c_cond)];
    if (c_score >= 0 && !fields[static_cast<size_t>(c_score)].empty()) {
      row.subjective_score = std::stod(fields[static_cast<size_t>(c_score)]);
    } else {
      double sum = 0.0;
      int count = 0;
      for (int c : listener_cols) {
        const std::string& f = fields[static_cast<size_t>(c)];
        if (f.empty()) continue;
        sum += std::stod(f);
        ++count;
      }
      if (count == 0) {
        throw runtime_error(path + " line " + std::to_string(line_no) +
                            ": no listener scores");
      }
      row.subjective_score = sum / count;
    }
    if (c_test >= 0) row.test_path = fields[static_cast<size_t>(c_test)];
    if (c_ref >= 0) row.reference_path = fields[static_cast<size_t>(c_ref)];
    if (c_group >= 0) row.subgroup = fields[static_cast<size_t>(c_group)];

    const double lo = file.scale_lo();
    const double hi = file.scale_hi();
    if (row.subjective_score < lo || row.subjective_score > hi) {
      throw runtime_error(path + " line " + std::to_string(line_no) +
                          ": subjective score " +
                          std::to_string(row.subjective_score) +
                          " outside the declared " + scale + " scale");
    }
    if (!seen.insert({row.item_id, row.condition}).second) {
      throw runtime_error(path + " line " + std::to_string(line_no) +
                          ": duplicate (item_id, condition) = (" +
                          row.item_id + ", " + row.condition + ")");
    }
    file.rows.push_back(std::move(row));
  }
  return file;
}

void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw runtime_error("cannot write predictions: " + path);
  out << "item_id,condition,distance,mapped_score,mode,aggregation\n";
  out << std::setprecision(17);
  for (const auto& p : predictions) {
    out << p.item_id << "," << p.condition << "," << p.distance << ",";
    if (p.mapped_score.has_value()) out << *p.mapped_score;
    out << "," << p.mode << "," << p.aggregation << "\n";
  }
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw runtime_error("cannot open predictions: " + path);
  std::string line;
  if (!std::getline(in, line)) throw runtime_error("empty predictions: " + path);
  auto header = split_csv_line(line);
  const std::vector<std::string> expect = {"item_id",      "condition",
                                           "distance",     "mapped_score",
                                           "mode",         "aggregation"};
  if (header != expect) {
    throw runtime_error("unexpected predictions header in " + path);
  }
  std::vector<PredictionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != expect.size()) {
      throw runtime_error("malformed prediction row in " + path + ": " + line);
    }
    PredictionRecord p;
    p.item_id = f[0];
    p.condition = f[1];
    p.distance = std::stod(f[2]);
    if (!f[3].empty()) p.mapped_score = std::stod(f[3]);
    p.mode = f[4];
    p.aggregation = f[5];
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

CorrelationCell correlate(const std::vector<double>& pred,
                          const std::vector<double>& subj) {
  CorrelationCell cell;
  cell.n_items = static_cast<int>(pred.size());
  if (pred.size() < 3) return cell;  // reported as null, never silently 0
  try {
    cell.pcc = pearson(pred, subj);
  } catch (const Error&) {
    cell.pcc = std::nullopt;
  }
  try {
    cell.srcc = spearman(pred, subj);
  } catch (const Error&) {
    cell.srcc = std::nullopt;
  }
  return cell;
}

}  // namespace

CorrelationReport evaluate(const std::vector<PredictionRecord>& predictions,
                           const std::vector<ListeningTestFile>& tests,
                           EvalPooling pooling) {
  std::map<std::pair<std::string, std::string>, const PredictionRecord*> index;
  for (const auto& p : predictions) {
    index[{p.item_id, p.condition}] = &p;
  }
  auto predicted_value = [](const PredictionRecord& p) {
    // Raw distances decrease with quality; negate when no mapping was used.
    return p.mapped_score.has_value() ? *p.mapped_score : -p.distance;
  };

  CorrelationReport report;
  std::vector<double> pooled_pred, pooled_subj;
  std::vector<std::string> missing;

  for (const auto& test : tests) {
    TestReport tr;
    tr.test_name = test.test_name;
    // (prediction, subjective, subgroup) triples, possibly pooled.
    std::vector<double> pred, subj;
    std::vector<std::string> groups;

    if (pooling == EvalPooling::kPerItem) {
      for (const auto& row : test.rows) {
        auto it = index.find({row.item_id, row.condition});
        if (it == index.end()) {
          missing.push_back(test.test_name + ": (" + row.item_id + ", " +
                            row.condition + ")");
          continue;
        }
        pred.push_back(predicted_value(*it->second));
        subj.push_back(row.subjective_score);
        groups.push_back(row.subgroup);
      }
    } else {
      // Pool rows per condition: mean prediction vs mean subjective score.
      std::map<std::string, std::vector<std::pair<double, double>>> per_cond;
      std::map<std::string, std::string> cond_group;
      for (const auto& row : test.rows) {
        auto it = index.find({row.item_id, row.condition});
        if (it == index.end()) {
          missing.push_back(test.test_name + ": (" + row.item_id + ", " +
                            row.condition + ")");
          continue;
        }
        per_cond[row.condition].push_back(
            {predicted_value(*it->second), row.subjective_score});
        auto g = cond_group.find(row.condition);
        if (g == cond_group.end()) {
          cond_group[row.condition] = row.subgroup;
        } else if (g->second != row.subgroup) {
          g->second = "";  // mixed subgroups pool into overall only
        }
      }
      for (const auto& [cond, pairs] : per_cond) {
        double mp = 0.0, ms = 0.0;
        for (const auto& [p, s] : pairs) {
          mp += p;
          ms += s;
        }
        pred.push_back(mp / static_cast<double>(pairs.size()));
        subj.push_back(ms / static_cast<double>(pairs.size()));
        groups.push_back(cond_group[cond]);
      }
    }

    tr.overall = correlate(pred, subj);
    std::set<std::string> names(groups.begin(), groups.end());
    names.erase("");
    for (const auto& name : names) {
      std::vector<double> gp, gs;
      for (size_t i = 0; i < pred.size(); ++i) {
        if (groups[i] == name) {
          gp.push_back(pred[i]);
          gs.push_back(subj[i]);
        }
      }
      tr.subgroups[name] = correlate(gp, gs);
    }
    pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
    pooled_subj.insert(pooled_subj.end(), subj.begin(), subj.end());
    report.tests.push_back(std::move(tr));
  }

  if (!missing.empty()) {
    std::ostringstream os;
    os << "evaluate: " << missing.size()
       << " listening-test rows have no matching prediction:";
    for (size_t i = 0; i < missing.size() && i < 20; ++i) {
      os << "\n  " << missing[i];
    }
    if (missing.size() > 20) os << "\n  ...";
    throw runtime_error(os.str());
  }

  report.pooled = correlate(pooled_pred, pooled_subj);
  return report;
}

namespace {

json cell_to_json(const CorrelationCell& cell) {
  json j;
  j["pcc"] = cell.pcc.has_value() ? json(*cell.pcc) : json(nullptr);
  j["srcc"] = cell.srcc.has_value() ? json(*cell.srcc) : json(nullptr);
  j["n_items"] = cell.n_items;
  return j;
}

std::string cell_to_text(const CorrelationCell& cell) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  if (cell.pcc.has_value()) {
    os << std::setw(7) << *cell.pcc;
  } else {
    os << std::setw(7) << "null";
  }
  os << " ";
  if (cell.srcc.has_value()) {
    os << std::setw(7) << *cell.srcc;
  } else {
    os << std::setw(7) << "null";
  }
  os << " " << std::setw(5) << cell.n_items;
  return os.str();
}

}  // namespace

json report_to_json(const CorrelationReport& report) {
  json j;
  j["kind"] = "laqm-correlation-report";
  j["format_version"] = 1;
  j["provenance"] = report.provenance;
  json tests = json::array();
  for (const auto& t : report.tests) {
    json tj;
    tj["test_name"] = t.test_name;
    tj["overall"] = cell_to_json(t.overall);
    json groups;
    for (const auto& [name, cell] : t.subgroups) {
      groups[name] = cell_to_json(cell);
    }
    tj["subgroups"] = groups;
    tests.push_back(tj);
  }
  j["tests"] = tests;
  j["pooled"] = cell_to_json(report.pooled);
  return j;
}

std::string report_to_text(const CorrelationReport& report) {
  std::ostringstream os;
  os << "test/subgroup                              PCC    SRCC     n\n";
  os << "---------------------------------------- ------- ------- -----\n";
  for (const auto& t : report.tests) {
    os << std::left << std::setw(40) << t.test_name << " " << std::right
       << cell_to_text(t.overall) << "\n";
    for (const auto& [name, cell] : t.subgroups) {
      os << std::left << std::setw(40) << ("  " + name) << " " << std::right
         << cell_to_text(cell) << "\n";
    }
  }
  os << std::left << std::setw(40) << "all tests pooled" << " " << std::right
     << cell_to_text(report.pooled) << "\n";
  return os.str();
}

void export_scatter(const std::vector<PredictionRecord>& predictions,
                    const std::vector<ListeningTestFile>& tests,
                    const std::string& path,
                    std::vector<std::string>* warnings) {
  std::map<std::pair<std::string, std::string>, const PredictionRecord*> index;
  for (const auto& p : predictions) index[{p.item_id, p.condition}] = &p;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw runtime_error("cannot write scatter export: " + path);
  out << "prediction,subjective,test_name,subgroup\n";
  out << std::setprecision(17);

  std::ofstream reg(path + ".regression.csv", std::ios::trunc);
  reg << "test_name,slope,intercept,n\n";
  reg << std::setprecision(17);

  std::vector<std::string> missing;
  for (const auto& test : tests) {
    std::vector<double> xs, ys;
    for (const auto& row : test.rows) {
      auto it = index.find({row.item_id, row.condition});
      if (it == index.end()) {
        missing.push_back(test.test_name + ": (" + row.item_id + ", " +
                          row.condition + ")");
        continue;
      }
      const PredictionRecord& p = *it->second;
      const double pred =
          p.mapped_score.has_value() ? *p.mapped_score : -p.distance;
      out << pred << "," << row.subjective_score << "," << test.test_name
          << "," << row.subgroup << "\n";
      xs.push_back(pred);
      ys.push_back(row.subjective_score);
    }
    if (xs.size() >= 2) {
      // Least-squares line y = slope * x + intercept.
      const double n = static_cast<double>(xs.size());
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
      }
      const double denom = n * sxx - sx * sx;
      if (denom != 0.0) {
        const double slope = (n * sxy - sx * sy) / denom;
        const double intercept = (sy - slope * sx) / n;
        reg << test.test_name << "," << slope << "," << intercept << ","
            << xs.size() << "\n";
      } else if (warnings != nullptr) {
        warnings->push_back("scatter: constant predictions in " +
                            test.test_name + ", regression omitted");
      }
    } else if (warnings != nullptr) {
      warnings->push_back("scatter: " + test.test_name +
                          " has fewer than 2 matched rows, regression omitted");
    }
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "export_scatter: " << missing.size()
       << " rows have no matching prediction";
    throw runtime_error(os.str());
  }
}

}  // namespace laqm
