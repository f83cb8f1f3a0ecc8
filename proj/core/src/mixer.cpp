#include "ambigzsl/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ambigzsl {
namespace {

std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void validate_policy(const LambdaPolicy& policy) {
  switch (policy.kind) {
    case LambdaPolicy::Kind::kFixed:
      if (!policy.allow_extrapolation && (policy.p0 < 0.0 || policy.p0 > 1.0))
        throw std::invalid_argument("lambda policy: fixed value must lie in [0, 1]");
      break;
    case LambdaPolicy::Kind::kUniform:
      if (policy.p0 > policy.p1)
        throw std::invalid_argument("lambda policy: uniform needs lo <= hi");
      if (!policy.allow_extrapolation && (policy.p0 < 0.0 || policy.p1 > 1.0))
        throw std::invalid_argument("lambda policy: uniform range must lie in [0, 1]");
      break;
    case LambdaPolicy::Kind::kNormal:
      if (policy.p1 <= 0.0)
        throw std::invalid_argument("lambda policy: normal needs std > 0");
      break;
    case LambdaPolicy::Kind::kBeta:
      if (policy.p0 <= 0.0 || policy.p1 <= 0.0)
        throw std::invalid_argument("lambda policy: beta needs alpha, beta > 0");
      break;
  }
}

std::string to_string(const LambdaPolicy& policy) {
  std::string out;
  switch (policy.kind) {
    case LambdaPolicy::Kind::kFixed:
      out = "fixed:" + format_param(policy.p0);
      break;
    case LambdaPolicy::Kind::kUniform:
      out = "uniform:" + format_param(policy.p0) + "," + format_param(policy.p1);
      break;
    case LambdaPolicy::Kind::kNormal:
      out = "normal:" + format_param(policy.p0) + "," + format_param(policy.p1);
      break;
    case LambdaPolicy::Kind::kBeta:
      out = "beta:" + format_param(policy.p0) + "," + format_param(policy.p1);
      break;
  }
  out += policy.per_minibatch ? "@batch" : "@sample";
  return out;
}

LambdaPolicy parse_lambda_policy(const std::string& text) {
  LambdaPolicy policy;
  std::string body = text;

  policy.per_minibatch = true;
  if (auto at = body.find('@'); at != std::string::npos) {
    std::string scope = body.substr(at + 1);
    body = body.substr(0, at);
    if (scope == "batch")
      policy.per_minibatch = true;
    else if (scope == "sample")
      policy.per_minibatch = false;
    else
      throw std::invalid_argument("lambda policy: unknown scope '" + scope +
                                  "', expected batch or sample");
  }

  std::string kind = body;
  std::vector<double> params;
  if (auto colon = body.find(':'); colon != std::string::npos) {
    kind = body.substr(0, colon);
    std::string rest = body.substr(colon + 1);
    size_t pos = 0;
    while (pos <= rest.size()) {
      size_t comma = rest.find(',', pos);
      if (comma == std::string::npos) comma = rest.size();
      std::string cell = rest.substr(pos, comma - pos);
      try {
        params.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("lambda policy: cannot parse parameter '" + cell +
                                    "'");
      }
      pos = comma + 1;
      if (comma == rest.size()) break;
    }
  }

  auto expect = [&](size_t n) {
    if (params.size() != n)
      throw std::invalid_argument("lambda policy: '" + kind + "' takes " +
                                  std::to_string(n) + " parameter(s)");
  };
  if (kind == "fixed") {
    policy.kind = LambdaPolicy::Kind::kFixed;
    expect(1);
    policy.p0 = params[0];
    policy.p1 = 0.0;
  } else if (kind == "uniform") {
    policy.kind = LambdaPolicy::Kind::kUniform;
    expect(2);
    policy.p0 = params[0];
    policy.p1 = params[1];
  } else if (kind == "normal") {
    policy.kind = LambdaPolicy::Kind::kNormal;
    expect(2);
    policy.p0 = params[0];
    policy.p1 = params[1];
  } else if (kind == "beta") {
    policy.kind = LambdaPolicy::Kind::kBeta;
    expect(2);
    policy.p0 = params[0];
    policy.p1 = params[1];
  } else {
    throw std::invalid_argument("lambda policy: unknown kind '" + kind + "'");
  }
  validate_policy(policy);
  return policy;
}

std::string to_string(const PoolSelector& pool) {
  switch (pool.kind) {
    case PoolSelector::Kind::kSeen:
      return "seen";
    case PoolSelector::Kind::kUnseen:
      return "unseen";
    case PoolSelector::Kind::kBoth:
      return "both";
  }
  return "both";
}

PoolSelector parse_pool(const std::string& text) {
  if (text == "seen") return {PoolSelector::Kind::kSeen};
  if (text == "unseen") return {PoolSelector::Kind::kUnseen};
  if (text == "both") return {PoolSelector::Kind::kBoth};
  throw std::invalid_argument("pool: unknown kind '" + text +
                              "', expected seen, unseen or both");
}

std::vector<int> pool_classes(const PoolSelector& pool, const DatasetBundle& bundle) {
  const auto& split = bundle.split();
  std::vector<int> out;
  switch (pool.kind) {
    case PoolSelector::Kind::kSeen:
      out = split.seen_classes;
      break;
    case PoolSelector::Kind::kUnseen:
      out = split.unseen_classes;
      break;
    case PoolSelector::Kind::kBoth:
      out.reserve(split.seen_classes.size() + split.unseen_classes.size());
      std::merge(split.seen_classes.begin(), split.seen_classes.end(),
                 split.unseen_classes.begin(), split.unseen_classes.end(),
                 std::back_inserter(out));
      break;
  }
  return out;
}

double sample_lambda(const LambdaPolicy& policy, RandomStream& rng) {
  switch (policy.kind) {
    case LambdaPolicy::Kind::kFixed:
      return policy.p0;
    case LambdaPolicy::Kind::kUniform:
      return rng.uniform(policy.p0, policy.p1);
    case LambdaPolicy::Kind::kNormal: {
      double v = rng.normal(policy.p0, policy.p1);
      if (policy.allow_extrapolation) return v;
      return std::clamp(v, 0.0, 1.0);
    }
    case LambdaPolicy::Kind::kBeta:
      return rng.beta(policy.p0, policy.p1);
  }
  throw std::logic_error("sample_lambda: unreachable");
}

AmbiguousBatch make_ambiguous_batch(const DatasetBundle& bundle, const PoolSelector& pool,
                                    const LambdaPolicy& policy, int batch_size,
                                    RandomStream& rng) {
  validate_policy(policy);
  if (batch_size < 1) throw std::invalid_argument("make_ambiguous_batch: batch_size < 1");
  std::vector<int> classes = pool_classes(pool, bundle);
  const int k = static_cast<int>(classes.size());
  if (k < 2)
    throw std::invalid_argument("make_ambiguous_batch: pool with < 2 classes (" +
                                to_string(pool) + " yields " + std::to_string(k) + ")");

  AmbiguousBatch batch;
  batch.pool_class_ids = classes;
  batch.prototypes.resize(batch_size, bundle.prototype_dim());
  batch.soft_labels = Eigen::MatrixXd::Zero(batch_size, k);
  batch.lambdas.resize(static_cast<size_t>(batch_size));
  batch.source_pairs.resize(static_cast<size_t>(batch_size));

  double shared_lambda = policy.per_minibatch ? sample_lambda(policy, rng) : 0.0;
  for (int r = 0; r < batch_size; ++r) {
    const double lambda = policy.per_minibatch ? shared_lambda : sample_lambda(policy, rng);
    int i = rng.uniform_int(k);
    int j = rng.uniform_int(k - 1);
    if (j >= i) ++j;
    const int y_i = classes[static_cast<size_t>(i)];
    const int y_j = classes[static_cast<size_t>(j)];

    const auto& c_i = bundle.prototype(y_i).vector;
    const auto& c_j = bundle.prototype(y_j).vector;
    batch.prototypes.row(r) =
        lambda * c_i.cast<double>() + (1.0 - lambda) * c_j.cast<double>();
    batch.soft_labels(r, i) = lambda;
    batch.soft_labels(r, j) = 1.0 - lambda;
    batch.lambdas[static_cast<size_t>(r)] = lambda;
    batch.source_pairs[static_cast<size_t>(r)] = {y_i, y_j};
  }
  return batch;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> visual_mixup_pair(
    const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const ClassPrototype& c_i,
    const ClassPrototype& c_j, double lambda) {
  if (x_i.size() != x_j.size())
    throw std::invalid_argument("visual_mixup_pair: feature dimension mismatch");
  if (c_i.vector.size() != c_j.vector.size())
    throw std::invalid_argument("visual_mixup_pair: prototype dimension mismatch");
  Eigen::VectorXd x = lambda * x_i + (1.0 - lambda) * x_j;
  Eigen::VectorXd c = lambda * c_i.vector.cast<double>().eval() +
                      (1.0 - lambda) * c_j.vector.cast<double>().eval();
  return {std::move(x), std::move(c)};
}

}  // namespace ambigzsl
