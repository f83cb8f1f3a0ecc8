#include "ambigzsl/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ambigzsl/rng.hpp"

namespace ambigzsl {
namespace {

using nlohmann::json;

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<float> parse_csv_line(const std::string& line, int line_no,
                                  const std::string& file) {
  std::vector<float> out;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    std::string cell = line.substr(pos, comma - pos);
    size_t consumed = 0;
    float v = 0.0f;
    try {
      v = std::stof(cell, &consumed);
    } catch (const std::exception&) {
      throw std::runtime_error(file + ":" + std::to_string(line_no) +
                               ": cannot parse value '" + cell + "'");
    }
    out.push_back(v);
    pos = comma + 1;
    if (comma == line.size()) break;
  }
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing file: " + p.string());
  return in;
}

bool sorted_unique(const std::vector<int>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

}  // namespace

bool SplitSpec::is_seen(int class_id) const {
  return std::binary_search(seen_classes.begin(), seen_classes.end(), class_id);
}

bool SplitSpec::is_unseen(int class_id) const {
  return std::binary_search(unseen_classes.begin(), unseen_classes.end(), class_id);
}

DatasetBundle::DatasetBundle(std::string name, Eigen::MatrixXf features,
                             std::vector<int> labels, Eigen::Index n_labeled,
                             std::vector<ClassPrototype> prototypes, SplitSpec split,
                             NormalizationStats normalization)
    : name_(std::move(name)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      n_labeled_(n_labeled),
      split_(std::move(split)),
      normalization_(std::move(normalization)) {
  for (auto& p : prototypes) prototypes_.emplace(p.class_id, std::move(p));
}

DatasetBundle::DatasetBundle(const DatasetBundle& other)
    : name_(other.name_),
      features_(other.features_),
      labels_(other.labels_),
      n_labeled_(other.n_labeled_),
      prototypes_(other.prototypes_),
      split_(other.split_),
      normalization_(other.normalization_) {
  unlabeled_feature_reads_ = other.unlabeled_feature_reads_.load();
  unlabeled_label_reads_ = other.unlabeled_label_reads_.load();
  seen_prototype_reads_ = other.seen_prototype_reads_.load();
  unseen_prototype_reads_ = other.unseen_prototype_reads_.load();
}

int DatasetBundle::prototype_dim() const {
  if (prototypes_.empty()) return 0;
  return static_cast<int>(prototypes_.begin()->second.vector.size());
}

Eigen::VectorXd DatasetBundle::feature(Eigen::Index i) const {
  if (i < 0 || i >= features_.rows())
    throw std::out_of_range("feature index " + std::to_string(i) + " out of range");
  if (i >= n_labeled_) unlabeled_feature_reads_.fetch_add(1, std::memory_order_relaxed);
  return features_.row(i).cast<double>();
}

Eigen::MatrixXd DatasetBundle::features_batch(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), features_.cols());
  for (size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index i = rows[r];
    if (i < 0 || i >= features_.rows())
      throw std::out_of_range("feature index " + std::to_string(i) + " out of range");
    if (i >= n_labeled_)
      unlabeled_feature_reads_.fetch_add(1, std::memory_order_relaxed);
    out.row(static_cast<Eigen::Index>(r)) = features_.row(i).cast<double>();
  }
  return out;
}

int DatasetBundle::train_label(Eigen::Index i) const {
  if (i < 0 || i >= n_labeled_)
    throw std::out_of_range("train_label: index " + std::to_string(i) +
                            " outside labeled region [0, " + std::to_string(n_labeled_) +
                            ")");
  return labels_[static_cast<size_t>(i)];
}

int DatasetBundle::eval_label(Eigen::Index i) const {
  if (i < 0 || i >= static_cast<Eigen::Index>(labels_.size()))
    throw std::out_of_range("eval_label: index " + std::to_string(i) + " out of range");
  if (i >= n_labeled_) unlabeled_label_reads_.fetch_add(1, std::memory_order_relaxed);
  return labels_[static_cast<size_t>(i)];
}

const ClassPrototype& DatasetBundle::prototype(int class_id) const {
  auto it = prototypes_.find(class_id);
  if (it == prototypes_.end())
    throw std::out_of_range("no prototype for class " + std::to_string(class_id));
  if (split_.is_unseen(class_id))
    unseen_prototype_reads_.fetch_add(1, std::memory_order_relaxed);
  else
    seen_prototype_reads_.fetch_add(1, std::memory_order_relaxed);
  return it->second;
}

Eigen::MatrixXd DatasetBundle::prototype_matrix(const std::vector<int>& class_ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(class_ids.size()), prototype_dim());
  for (size_t r = 0; r < class_ids.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = prototype(class_ids[r]).vector.cast<double>();
  return out;
}

AccessStats DatasetBundle::access_stats() const {
  AccessStats s;
  s.unlabeled_feature_reads = unlabeled_feature_reads_.load();
  s.unlabeled_label_reads = unlabeled_label_reads_.load();
  s.seen_prototype_reads = seen_prototype_reads_.load();
  s.unseen_prototype_reads = unseen_prototype_reads_.load();
  return s;
}

void DatasetBundle::reset_access_stats() const {
  unlabeled_feature_reads_ = 0;
  unlabeled_label_reads_ = 0;
  seen_prototype_reads_ = 0;
  unseen_prototype_reads_ = 0;
}

std::vector<std::string> validate_bundle(const DatasetBundle& bundle) {
  std::vector<std::string> violations;
  const auto& split = bundle.split();
  const auto& features = bundle.features_raw();
  const auto& labels = bundle.labels_raw();

  if (!sorted_unique(split.seen_classes))
    violations.push_back("seen class list not sorted ascending without duplicates");
  if (!sorted_unique(split.unseen_classes))
    violations.push_back("unseen class list not sorted ascending without duplicates");
  for (int c : split.seen_classes)
    if (split.is_unseen(c))
      violations.push_back("non-disjoint split: class " + std::to_string(c) +
                           " is both seen and unseen");

  if (bundle.labeled_count() < 0 || bundle.labeled_count() > bundle.total_count())
    violations.push_back("labeled count " + std::to_string(bundle.labeled_count()) +
                         " outside [0, " + std::to_string(bundle.total_count()) + "]");

  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    violations.push_back("label count " + std::to_string(labels.size()) +
                         " does not match feature row count " +
                         std::to_string(features.rows()));

  const Eigen::Index l = std::clamp<Eigen::Index>(bundle.labeled_count(), 0,
                                                  static_cast<Eigen::Index>(labels.size()));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(labels.size()); ++i) {
    int y = labels[static_cast<size_t>(i)];
    bool seen = split.is_seen(y);
    bool unseen = split.is_unseen(y);
    if (!seen && !unseen) {
      violations.push_back("label " + std::to_string(y) + " at row " + std::to_string(i) +
                           " is outside the split");
      continue;
    }
    if (i < l && unseen)
      violations.push_back("labeled region contains unseen class " + std::to_string(y) +
                           " at row " + std::to_string(i));
    if (i >= l && seen)
      violations.push_back("unlabeled region contains seen class " + std::to_string(y) +
                           " at row " + std::to_string(i));
  }

  for (Eigen::Index r = 0; r < features.rows(); ++r)
    for (Eigen::Index c = 0; c < features.cols(); ++c)
      if (!std::isfinite(features(r, c))) {
        violations.push_back("non-finite feature at index (" + std::to_string(r) + ", " +
                             std::to_string(c) + ")");
        r = features.rows();  // one report is enough
        break;
      }

  const auto& prototypes = bundle.prototypes_raw();
  int a = -1;
  for (const auto& [class_id, proto] : prototypes) {
    if (a < 0) a = static_cast<int>(proto.vector.size());
    if (static_cast<int>(proto.vector.size()) != a)
      violations.push_back("prototype dimension mismatch for class " +
                           std::to_string(class_id));
    for (Eigen::Index k = 0; k < proto.vector.size(); ++k)
      if (!std::isfinite(proto.vector(k))) {
        violations.push_back("non-finite prototype value for class " +
                             std::to_string(class_id));
        break;
      }
  }
  auto require_prototype = [&](int c) {
    if (prototypes.find(c) == prototypes.end())
      violations.push_back("class without prototype: " + std::to_string(c));
  };
  for (int c : split.seen_classes) require_prototype(c);
  for (int c : split.unseen_classes) require_prototype(c);

  return violations;
}

DatasetBundle load_dataset(const std::filesystem::path& root, const std::string& name) {
  return load_dataset_dir(root / name, name);
}

DatasetBundle load_dataset_dir(const std::filesystem::path& dir, const std::string& name) {
  auto split_in = open_or_throw(dir / "split.json");
  json split_doc;
  try {
    split_in >> split_doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("split.json: " + std::string(e.what()));
  }
  for (const char* key : {"seen", "unseen", "n_labeled", "d", "a"})
    if (!split_doc.contains(key))
      throw std::runtime_error("split.json: missing key '" + std::string(key) + "'");

  SplitSpec split;
  split.seen_classes = split_doc["seen"].get<std::vector<int>>();
  split.unseen_classes = split_doc["unseen"].get<std::vector<int>>();
  std::sort(split.seen_classes.begin(), split.seen_classes.end());
  std::sort(split.unseen_classes.begin(), split.unseen_classes.end());
  const auto n_labeled = split_doc["n_labeled"].get<Eigen::Index>();
  const int d = split_doc["d"].get<int>();
  const int a = split_doc["a"].get<int>();
  std::string bundle_name = split_doc.value("name", name);

  std::vector<std::vector<float>> feature_rows;
  {
    auto in = open_or_throw(dir / "features.csv");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto row = parse_csv_line(line, line_no, "features.csv");
      if (static_cast<int>(row.size()) != d)
        throw std::runtime_error("features.csv:" + std::to_string(line_no) +
                                 ": dimension mismatch, expected " + std::to_string(d) +
                                 " values, got " + std::to_string(row.size()));
      feature_rows.push_back(std::move(row));
    }
  }

  std::vector<int> labels;
  {
    auto in = open_or_throw(dir / "labels.csv");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        labels.push_back(std::stoi(line));
      } catch (const std::exception&) {
        throw std::runtime_error("labels.csv:" + std::to_string(line_no) +
                                 ": cannot parse label '" + line + "'");
      }
    }
  }
  if (labels.size() != feature_rows.size())
    throw std::runtime_error("dimension mismatch: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(feature_rows.size()) +
                             " feature rows");

  std::vector<ClassPrototype> prototypes;
  {
    auto in = open_or_throw(dir / "prototypes.csv");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto row = parse_csv_line(line, line_no, "prototypes.csv");
      if (static_cast<int>(row.size()) != a + 1)
        throw std::runtime_error("prototypes.csv:" + std::to_string(line_no) +
                                 ": dimension mismatch, expected class id plus " +
                                 std::to_string(a) + " values, got " +
                                 std::to_string(row.size()));
      ClassPrototype p;
      p.class_id = static_cast<int>(std::lround(row[0]));
      p.vector = Eigen::Map<Eigen::VectorXf>(row.data() + 1, a);
      prototypes.push_back(std::move(p));
    }
  }

  Eigen::MatrixXf features(static_cast<Eigen::Index>(feature_rows.size()), d);
  for (size_t r = 0; r < feature_rows.size(); ++r)
    features.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<Eigen::VectorXf>(feature_rows[r].data(), d);

  // Min-max per dimension, but never stretching data already inside [0, 1]:
  // bounds are widened to include 0 and 1 so a second load is the identity.
  NormalizationStats stats;
  stats.lo = Eigen::VectorXf::Zero(d);
  stats.hi = Eigen::VectorXf::Ones(d);
  if (features.rows() > 0) {
    for (int j = 0; j < d; ++j) {
      float lo = std::min(0.0f, features.col(j).minCoeff());
      float hi = std::max(1.0f, features.col(j).maxCoeff());
      stats.lo(j) = lo;
      stats.hi(j) = hi;
      if (lo < 0.0f || hi > 1.0f)
        features.col(j) = (features.col(j).array() - lo) / (hi - lo);
    }
  }

  DatasetBundle bundle(std::move(bundle_name), std::move(features), std::move(labels),
                       n_labeled, std::move(prototypes), std::move(split),
                       std::move(stats));
  auto violations = validate_bundle(bundle);
  if (!violations.empty()) {
    std::string msg = "invalid dataset '" + bundle.name() + "':";
    for (const auto& v : violations) msg += "\n  " + v;
    throw std::runtime_error(msg);
  }
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& features = bundle.features_raw();

  {
    std::ofstream out(dir / "features.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "features.csv").string());
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      for (Eigen::Index c = 0; c < features.cols(); ++c) {
        if (c) out << ',';
        out << format_float(features(r, c));
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "labels.csv").string());
    for (int y : bundle.labels_raw()) out << y << '\n';
  }
  {
    std::ofstream out(dir / "prototypes.csv");
    if (!out)
      throw std::runtime_error("cannot write " + (dir / "prototypes.csv").string());
    for (const auto& [class_id, proto] : bundle.prototypes_raw()) {
      out << class_id;
      for (Eigen::Index k = 0; k < proto.vector.size(); ++k)
        out << ',' << format_float(proto.vector(k));
      out << '\n';
    }
  }
  {
    json doc;
    doc["name"] = bundle.name();
    doc["seen"] = bundle.split().seen_classes;
    doc["unseen"] = bundle.split().unseen_classes;
    doc["n_labeled"] = bundle.labeled_count();
    doc["d"] = bundle.feature_dim();
    doc["a"] = bundle.prototype_dim();
    std::ofstream out(dir / "split.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "split.json").string());
    out << doc.dump(2) << '\n';
  }
}

DatasetBundle generate_synthetic_bundle(int n_seen, int n_unseen, int d, int a,
                                        int samples_per_class, double noise_scale,
                                        uint64_t seed) {
  if (n_seen < 1 || n_unseen < 1 || d < 1 || a < 1 || samples_per_class < 1)
    throw std::invalid_argument("generate_synthetic_bundle: all sizes must be positive");

  RandomStream rng(seed);
  const int n_classes = n_seen + n_unseen;

  std::vector<ClassPrototype> prototypes(static_cast<size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    prototypes[static_cast<size_t>(c)].class_id = c + 1;
    Eigen::VectorXf& v = prototypes[static_cast<size_t>(c)].vector;
    v.resize(a);
    for (int k = 0; k < a; ++k) v(k) = static_cast<float>(rng.uniform());
  }

  // Fixed random linear map from centered prototypes to feature logits,
  // scaled so logit standard deviation is around 2.5 and class clusters
  // land well apart inside [0, 1].
  const double g = 8.66 / std::sqrt(static_cast<double>(a));
  Eigen::MatrixXd map(d, a);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < a; ++c) map(r, c) = rng.normal(0.0, g);

  const Eigen::Index total = static_cast<Eigen::Index>(n_classes) * samples_per_class;
  Eigen::MatrixXf features(total, d);
  std::vector<int> labels(static_cast<size_t>(total));
  Eigen::Index row = 0;
  for (int c = 0; c < n_classes; ++c) {
    Eigen::VectorXd centered =
        prototypes[static_cast<size_t>(c)].vector.cast<double>().array() - 0.5;
    Eigen::VectorXd mean = (map * centered).unaryExpr(
        [](double t) { return 1.0 / (1.0 + std::exp(-t)); });
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      labels[static_cast<size_t>(row)] = c + 1;
      for (int j = 0; j < d; ++j) {
        double x = mean(j) + rng.normal(0.0, noise_scale);
        features(row, j) = static_cast<float>(std::clamp(x, 0.0, 1.0));
      }
    }
  }

  SplitSpec split;
  for (int c = 1; c <= n_seen; ++c) split.seen_classes.push_back(c);
  for (int c = n_seen + 1; c <= n_classes; ++c) split.unseen_classes.push_back(c);

  NormalizationStats stats;
  stats.lo = Eigen::VectorXf::Zero(d);
  stats.hi = Eigen::VectorXf::Ones(d);

  return DatasetBundle("synthetic", std::move(features), std::move(labels),
                       static_cast<Eigen::Index>(n_seen) * samples_per_class,
                       std::move(prototypes), std::move(split), std::move(stats));
}

}  // namespace ambigzsl
