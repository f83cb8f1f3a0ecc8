#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/nets.hpp"

namespace ambigzsl {

// Task x training-setting label, serialized as ZSL-IN, ZSL-TR, GZSL-IN,
// GZSL-TR.
enum class EvalSetting {
  kZslInductive,
  kZslTransductive,
  kGzslInductive,
  kGzslTransductive,
};

std::string to_string(EvalSetting setting);
EvalSetting parse_eval_setting(const std::string& text);
bool is_gzsl(EvalSetting setting);

// One evaluated (dataset, setting) cell: t1 for ZSL settings, (u, s, h)
// for GZSL settings; all values are percents in [0, 100].
struct MetricsRecord {
  std::string dataset;
  EvalSetting setting = EvalSetting::kZslInductive;
  double t1 = 0.0;
  double u = 0.0;
  double s = 0.0;
  double h = 0.0;
};

struct GzslResult {
  double u = 0.0;
  double s = 0.0;
  double h = 0.0;
};

// 2us/(u+s), defined as 0 when u + s = 0.
double harmonic_mean(double u, double s);

// Mean over class_set of per-class accuracy, times 100. Every class is
// weighted equally regardless of its sample count.
double per_class_top1(const std::vector<int>& predictions, const std::vector<int>& labels,
                      const std::vector<int>& class_set);

// Per-class accuracies over both test slices with the classifier's full
// class list as search space; class sets are the labels present in each
// slice.
GzslResult gzsl_eval(const LinearClassifier& clf, const LabeledFeatures& seen_test,
                     const LabeledFeatures& unseen_test);

// Cross-benchmark aggregate: per-dataset score gain over a reference
// method, summarized by the median.
struct AggregateReport {
  std::string reference_method;
  std::map<std::string, double> per_dataset_gains;
  double mnrg = 0.0;
};

// Even count: mean of the two central values.
double median(std::vector<double> values);

AggregateReport mnrg(const std::map<std::string, double>& method_scores,
                     const std::map<std::string, double>& reference_scores,
                     const std::string& reference_method = "");

// Machine-readable report plus an aligned text table. ZSL records carry
// only t1; GZSL records carry only u/s/h.
std::string report_json(const std::vector<MetricsRecord>& records,
                        const std::vector<AggregateReport>& aggregates);
std::string report_table(const std::vector<MetricsRecord>& records,
                         const std::vector<AggregateReport>& aggregates);
void emit_report(const std::vector<MetricsRecord>& records,
                 const std::vector<AggregateReport>& aggregates,
                 const std::filesystem::path& json_path,
                 const std::filesystem::path& table_path);

// Score tables (published numbers or own results) as flat CSV rows:
// method,dataset,setting,metric,value.
struct ScoreRow {
  std::string method;
  std::string dataset;
  std::string setting;
  std::string metric;
  double value = 0.0;
};

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path);
void write_score_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);

}  // namespace ambigzsl
