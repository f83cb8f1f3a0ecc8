#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ambigzsl {

// A per-class semantic vector (attributes or text embedding). Dimension is
// uniform across a bundle.
struct ClassPrototype {
  int class_id = 0;
  Eigen::VectorXf vector;
};

// Disjoint seen/unseen class id sets, kept sorted ascending.
struct SplitSpec {
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;

  bool is_seen(int class_id) const;
  bool is_unseen(int class_id) const;
};

// Per-dimension bounds applied at ingestion. Dimensions already inside
// [0, 1] are left untouched so that save -> load round-trips exactly.
struct NormalizationStats {
  Eigen::VectorXf lo;
  Eigen::VectorXf hi;
};

// A bare labeled feature set, e.g. synthesized training data for the
// final classifiers or a slice of a bundle for evaluation.
struct LabeledFeatures {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // length n
};

// Counters for the access guard. Training code must keep the label and
// (in inductive mode) unlabeled-feature counters at zero; tests assert it.
struct AccessStats {
  uint64_t unlabeled_feature_reads = 0;
  uint64_t unlabeled_label_reads = 0;
  uint64_t seen_prototype_reads = 0;
  uint64_t unseen_prototype_reads = 0;
};

// Visual features, labels, prototypes and the seen/unseen split.
//
// Rows [0, l) are labeled seen-class samples; rows [l, t) are unseen-class
// samples whose labels are withheld from training. Label access is split
// into a training-mode accessor (labeled region only) and an
// evaluation-mode accessor; reads of withheld labels and of unlabeled
// features are counted so leakage can be asserted in tests.
class DatasetBundle {
 public:
  DatasetBundle(std::string name, Eigen::MatrixXf features, std::vector<int> labels,
                Eigen::Index n_labeled, std::vector<ClassPrototype> prototypes,
                SplitSpec split, NormalizationStats normalization);
  DatasetBundle(const DatasetBundle& other);
  DatasetBundle& operator=(const DatasetBundle&) = delete;

  const std::string& name() const { return name_; }
  Eigen::Index total_count() const { return features_.rows(); }
  Eigen::Index labeled_count() const { return n_labeled_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  int prototype_dim() const;

  // Training-mode access.
  Eigen::VectorXd feature(Eigen::Index i) const;
  Eigen::MatrixXd features_batch(const std::vector<Eigen::Index>& rows) const;
  int train_label(Eigen::Index i) const;  // throws for i >= labeled_count()

  // Evaluation-mode access; reads in the withheld region are counted.
  int eval_label(Eigen::Index i) const;

  const ClassPrototype& prototype(int class_id) const;
  // Stacked prototype rows for the given class ids, in the given order.
  Eigen::MatrixXd prototype_matrix(const std::vector<int>& class_ids) const;

  const SplitSpec& split() const { return split_; }
  const NormalizationStats& normalization() const { return normalization_; }

  AccessStats access_stats() const;
  void reset_access_stats() const;

  // Unguarded views for serialization and validation.
  const Eigen::MatrixXf& features_raw() const { return features_; }
  const std::vector<int>& labels_raw() const { return labels_; }
  const std::map<int, ClassPrototype>& prototypes_raw() const { return prototypes_; }

 private:
  std::string name_;
  Eigen::MatrixXf features_;
  std::vector<int> labels_;
  Eigen::Index n_labeled_ = 0;
  std::map<int, ClassPrototype> prototypes_;
  SplitSpec split_;
  NormalizationStats normalization_;

  mutable std::atomic<uint64_t> unlabeled_feature_reads_{0};
  mutable std::atomic<uint64_t> unlabeled_label_reads_{0};
  mutable std::atomic<uint64_t> seen_prototype_reads_{0};
  mutable std::atomic<uint64_t> unseen_prototype_reads_{0};
};

// Exhaustive invariant check. Returns human-readable violation
// descriptions; empty means the bundle is valid.
std::vector<std::string> validate_bundle(const DatasetBundle& bundle);

// Loads <root>/<name>/{features.csv,labels.csv,prototypes.csv,split.json},
// min-max normalizing feature dimensions that fall outside [0, 1]. Throws
// on missing files or invariant violations.
DatasetBundle load_dataset(const std::filesystem::path& root, const std::string& name);
DatasetBundle load_dataset_dir(const std::filesystem::path& dir, const std::string& name);

// Writes the documented directory layout (values at 9 significant digits,
// which round-trips float exactly).
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

// Desk-scale synthetic dataset. Prototypes are drawn uniformly in [0,1]^a,
// features are sigmoid(M (c - 1/2)) plus Gaussian noise clipped to [0, 1],
// with M a fixed random linear map, so visual clusters are a deterministic
// function of the prototypes. Deterministic for a fixed seed.
DatasetBundle generate_synthetic_bundle(int n_seen, int n_unseen, int d, int a,
                                        int samples_per_class, double noise_scale,
                                        uint64_t seed);

}  // namespace ambigzsl
