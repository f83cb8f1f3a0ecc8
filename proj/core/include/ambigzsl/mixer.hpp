#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/rng.hpp"

namespace ambigzsl {

// Distribution of the interpolation coefficient. per_minibatch shares one
// draw across a whole batch. allow_extrapolation lifts the [0,1] clamp
// (and the fixed-value range check) so negative coefficients can be
// studied; it is off by default and leaves beta/uniform untouched.
struct LambdaPolicy {
  enum class Kind { kFixed, kUniform, kNormal, kBeta };
  Kind kind = Kind::kBeta;
  double p0 = 0.3;  // fixed: value, uniform: lo, normal: mean, beta: alpha
  double p1 = 0.3;  // uniform: hi, normal: std, beta: beta
  bool per_minibatch = true;
  bool allow_extrapolation = false;
};

void validate_policy(const LambdaPolicy& policy);

// Round-trips through "kind[:p0[,p1]][@batch|@sample]", e.g.
// "beta:0.3,0.3@batch", "fixed:0.5", "uniform:0,1@sample".
std::string to_string(const LambdaPolicy& policy);
LambdaPolicy parse_lambda_policy(const std::string& text);

// Which side of the split supplies prototypes for interpolation.
struct PoolSelector {
  enum class Kind { kSeen, kUnseen, kBoth };
  Kind kind = Kind::kBoth;
};

std::string to_string(const PoolSelector& pool);
PoolSelector parse_pool(const std::string& text);

// Sorted class ids the selector yields on this bundle.
std::vector<int> pool_classes(const PoolSelector& pool, const DatasetBundle& bundle);

// A batch of virtual classes: interpolated prototypes with matching
// two-hot soft labels over the pool's classes (columns follow
// pool_class_ids order).
struct AmbiguousBatch {
  Eigen::MatrixXd prototypes;   // b x a
  Eigen::MatrixXd soft_labels;  // b x K
  std::vector<double> lambdas;
  std::vector<std::pair<int, int>> source_pairs;
  std::vector<int> pool_class_ids;
};

double sample_lambda(const LambdaPolicy& policy, RandomStream& rng);

// Pairs are uniform over unordered distinct class pairs from the pool.
AmbiguousBatch make_ambiguous_batch(const DatasetBundle& bundle, const PoolSelector& pool,
                                    const LambdaPolicy& policy, int batch_size,
                                    RandomStream& rng);

// Mixes a visual sample pair and its prototypes with one coefficient.
std::pair<Eigen::VectorXd, Eigen::VectorXd> visual_mixup_pair(
    const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const ClassPrototype& c_i,
    const ClassPrototype& c_j, double lambda);

}  // namespace ambigzsl
