#include "ambigzsl/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace ambigzsl {
namespace {

using nlohmann::json;

std::vector<int> classes_present(const std::vector<int>& labels) {
  std::set<int> uniq(labels.begin(), labels.end());
  return {uniq.begin(), uniq.end()};
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    cells.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
    if (comma == line.size()) break;
  }
  return cells;
}

}  // namespace

std::string to_string(EvalSetting setting) {
  switch (setting) {
    case EvalSetting::kZslInductive:
      return "ZSL-IN";
    case EvalSetting::kZslTransductive:
      return "ZSL-TR";
    case EvalSetting::kGzslInductive:
      return "GZSL-IN";
    case EvalSetting::kGzslTransductive:
      return "GZSL-TR";
  }
  return "ZSL-IN";
}

EvalSetting parse_eval_setting(const std::string& text) {
  if (text == "ZSL-IN") return EvalSetting::kZslInductive;
  if (text == "ZSL-TR") return EvalSetting::kZslTransductive;
  if (text == "GZSL-IN") return EvalSetting::kGzslInductive;
  if (text == "GZSL-TR") return EvalSetting::kGzslTransductive;
  throw std::invalid_argument("setting: unknown value '" + text + "'");
}

bool is_gzsl(EvalSetting setting) {
  return setting == EvalSetting::kGzslInductive ||
         setting == EvalSetting::kGzslTransductive;
}

double harmonic_mean(double u, double s) {
  if (u + s == 0.0) return 0.0;
  return 2.0 * u * s / (u + s);
}

double per_class_top1(const std::vector<int>& predictions, const std::vector<int>& labels,
                      const std::vector<int>& class_set) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("per_class_top1: prediction/label length mismatch");
  if (class_set.empty()) throw std::invalid_argument("per_class_top1: empty class set");

  std::unordered_map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
  for (int c : class_set) per_class[c] = {0, 0};
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = per_class.find(labels[i]);
    if (it == per_class.end())
      throw std::invalid_argument("per_class_top1: label " + std::to_string(labels[i]) +
                                  " is outside the class set");
    ++it->second.second;
    if (predictions[i] == labels[i]) ++it->second.first;
  }

  double sum = 0.0;
  for (int c : class_set) {
    const auto& [correct, total] = per_class[c];
    if (total == 0)
      throw std::runtime_error("per_class_top1: class " + std::to_string(c) +
                               " has zero test samples");
    sum += static_cast<double>(correct) / static_cast<double>(total);
  }
  return 100.0 * sum / static_cast<double>(class_set.size());
}

GzslResult gzsl_eval(const LinearClassifier& clf, const LabeledFeatures& seen_test,
                     const LabeledFeatures& unseen_test) {
  if (seen_test.features.rows() == 0 || unseen_test.features.rows() == 0)
    throw std::invalid_argument("gzsl_eval: empty test set");

  auto evaluate = [&](const LabeledFeatures& slice) {
    std::vector<int> preds(slice.labels.size());
    for (Eigen::Index i = 0; i < slice.features.rows(); ++i)
      preds[static_cast<size_t>(i)] = predict(clf, slice.features.row(i).transpose());
    return per_class_top1(preds, slice.labels, classes_present(slice.labels));
  };

  GzslResult r;
  r.u = evaluate(unseen_test);
  r.s = evaluate(seen_test);
  r.h = harmonic_mean(r.u, r.s);
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AggregateReport mnrg(const std::map<std::string, double>& method_scores,
                     const std::map<std::string, double>& reference_scores,
                     const std::string& reference_method) {
  if (method_scores.empty()) throw std::invalid_argument("mnrg: no datasets");
  AggregateReport report;
  report.reference_method = reference_method;
  std::vector<double> gains;
  for (const auto& [dataset, score] : method_scores) {
    auto it = reference_scores.find(dataset);
    if (it == reference_scores.end())
      throw std::invalid_argument("mnrg: dataset key mismatch, reference lacks '" +
                                  dataset + "'");
    report.per_dataset_gains[dataset] = score - it->second;
    gains.push_back(score - it->second);
  }
  if (reference_scores.size() != method_scores.size())
    throw std::invalid_argument("mnrg: dataset key mismatch, counts differ");
  report.mnrg = median(std::move(gains));
  return report;
}

std::string report_json(const std::vector<MetricsRecord>& records,
                        const std::vector<AggregateReport>& aggregates) {
  json doc;
  doc["records"] = json::array();
  for (const auto& r : records) {
    json row;
    row["dataset"] = r.dataset;
    row["setting"] = to_string(r.setting);
    if (is_gzsl(r.setting)) {
      row["u"] = r.u;
      row["s"] = r.s;
      row["h"] = r.h;
    } else {
      row["t1"] = r.t1;
    }
    doc["records"].push_back(std::move(row));
  }
  doc["aggregates"] = json::array();
  for (const auto& a : aggregates) {
    json row;
    row["reference_method"] = a.reference_method;
    row["gains"] = a.per_dataset_gains;
    row["mnrg"] = a.mnrg;
    doc["aggregates"].push_back(std::move(row));
  }
  return doc.dump(2);
}

std::string report_table(const std::vector<MetricsRecord>& records,
                         const std::vector<AggregateReport>& aggregates) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-8s %7s %7s %7s %7s\n", "dataset", "setting",
                "T1", "u", "s", "H");
  out += buf;
  for (const auto& r : records) {
    if (is_gzsl(r.setting)) {
      std::snprintf(buf, sizeof(buf), "%-12s %-8s %7s %7.1f %7.1f %7.1f\n",
                    r.dataset.c_str(), to_string(r.setting).c_str(), "-", r.u, r.s, r.h);
    } else {
      std::snprintf(buf, sizeof(buf), "%-12s %-8s %7.1f %7s %7s %7s\n", r.dataset.c_str(),
                    to_string(r.setting).c_str(), r.t1, "-", "-", "-");
    }
    out += buf;
  }
  for (const auto& a : aggregates) {
    out += "\n";
    for (const auto& [dataset, gain] : a.per_dataset_gains) {
      std::snprintf(buf, sizeof(buf), "%-12s gain vs %s: %+.1f\n", dataset.c_str(),
                    a.reference_method.c_str(), gain);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mNRG vs %s: %.1f\n", a.reference_method.c_str(),
                  a.mnrg);
    out += buf;
  }
  return out;
}

void emit_report(const std::vector<MetricsRecord>& records,
                 const std::vector<AggregateReport>& aggregates,
                 const std::filesystem::path& json_path,
                 const std::filesystem::path& table_path) {
  {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write report " + json_path.string());
    out << report_json(records, aggregates) << '\n';
  }
  {
    std::ofstream out(table_path);
    if (!out) throw std::runtime_error("cannot write report " + table_path.string());
    out << report_table(records, aggregates);
  }
}

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::vector<ScoreRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == "method,dataset,setting,metric,value") continue;
    auto cells = split_csv_row(line);
    if (cells.size() != 5)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 5 columns, got " + std::to_string(cells.size()));
    ScoreRow row;
    row.method = cells[0];
    row.dataset = cells[1];
    row.setting = cells[2];
    row.metric = cells[3];
    try {
      row.value = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": cannot parse value '" + cells[4] + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_score_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,dataset,setting,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.value);
    out << r.method << ',' << r.dataset << ',' << r.setting << ',' << r.metric << ','
        << buf << '\n';
  }
}

}  // namespace ambigzsl
