#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/mixer.hpp"
#include "ambigzsl/rng.hpp"

using namespace ambigzsl;

TEST_CASE("policy grammar round-trips and rejects junk") {
  for (const char* text :
       {"beta:0.3,0.3@batch", "uniform:0,1@batch", "normal:0.5,0.25@batch",
        "fixed:0.5@batch", "fixed:0.2@sample", "beta:2,5@sample"}) {
    const LambdaPolicy policy = parse_lambda_policy(text);
    CHECK(to_string(policy) == text);
  }
  // scope defaults to per-minibatch
  CHECK(parse_lambda_policy("fixed:0.5").per_minibatch);
  CHECK_FALSE(parse_lambda_policy("fixed:0.5@sample").per_minibatch);

  CHECK_THROWS(parse_lambda_policy("triangle:0.5"));
  CHECK_THROWS(parse_lambda_policy("fixed"));
  CHECK_THROWS(parse_lambda_policy("fixed:0.1,0.2"));
  CHECK_THROWS(parse_lambda_policy("beta:0.3"));
  CHECK_THROWS(parse_lambda_policy("uniform:0,1@weekly"));
  CHECK_THROWS(parse_lambda_policy(""));
}

TEST_CASE("policy validation enforces parameter ranges") {
  LambdaPolicy fixed = parse_lambda_policy("fixed:0.5");
  validate_policy(fixed);
  fixed.p0 = 1.5;
  CHECK_THROWS(validate_policy(fixed));
  fixed.allow_extrapolation = true;
  validate_policy(fixed);  // range check lifted

  // invalid parameters are rejected at parse time too
  CHECK_THROWS(parse_lambda_policy("uniform:0.8,0.2"));  // lo > hi
  CHECK_THROWS(parse_lambda_policy("uniform:-0.1,1"));
  CHECK_THROWS(parse_lambda_policy("normal:0.5,0"));
  CHECK_THROWS(parse_lambda_policy("beta:0,0.3"));

  LambdaPolicy beta = parse_lambda_policy("beta:0.3,0.3");
  beta.p1 = -1.0;
  CHECK_THROWS(validate_policy(beta));
}

TEST_CASE("pool selector parses and yields sorted pool classes") {
  CHECK(to_string(parse_pool("seen")) == "seen");
  CHECK(to_string(parse_pool("unseen")) == "unseen");
  CHECK(to_string(parse_pool("both")) == "both");
  CHECK_THROWS(parse_pool("all"));

  DatasetBundle bundle = generate_synthetic_bundle(3, 2, 4, 3, 2, 0.05, 5);
  CHECK(pool_classes(parse_pool("seen"), bundle) == std::vector<int>{1, 2, 3});
  CHECK(pool_classes(parse_pool("unseen"), bundle) == std::vector<int>{4, 5});
  CHECK(pool_classes(parse_pool("both"), bundle) == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("sample_lambda honors each policy") {
  RandomStream rng(71);
  CHECK(sample_lambda(parse_lambda_policy("fixed:0.37"), rng) == 0.37);
  for (int i = 0; i < 2000; ++i) {
    const double u = sample_lambda(parse_lambda_policy("uniform:0.2,0.6"), rng);
    CHECK(u >= 0.2);
    CHECK(u < 0.6);
    const double n = sample_lambda(parse_lambda_policy("normal:0.5,10"), rng);
    CHECK(n >= 0.0);  // clamped without extrapolation
    CHECK(n <= 1.0);
    const double b = sample_lambda(parse_lambda_policy("beta:0.3,0.3"), rng);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
  LambdaPolicy wide = parse_lambda_policy("normal:0.5,10");
  wide.allow_extrapolation = true;
  bool outside = false;
  for (int i = 0; i < 200; ++i) {
    const double v = sample_lambda(wide, rng);
    outside = outside || v < 0.0 || v > 1.0;
  }
  CHECK(outside);  // clamp really is lifted
}

TEST_CASE("ambiguous batch invariants") {
  DatasetBundle bundle = generate_synthetic_bundle(4, 3, 6, 5, 3, 0.05, 9);
  RandomStream rng(13);
  const LambdaPolicy policy = parse_lambda_policy("beta:0.3,0.3@sample");
  const PoolSelector pool = parse_pool("both");
  AmbiguousBatch batch = make_ambiguous_batch(bundle, pool, policy, 64, rng);

  REQUIRE(batch.prototypes.rows() == 64);
  REQUIRE(batch.soft_labels.rows() == 64);
  REQUIRE(batch.soft_labels.cols() == 7);
  REQUIRE(batch.lambdas.size() == 64);
  REQUIRE(batch.source_pairs.size() == 64);
  CHECK(batch.pool_class_ids == pool_classes(pool, bundle));

  for (int r = 0; r < 64; ++r) {
    const double lambda = batch.lambdas[r];
    const auto [yi, yj] = batch.source_pairs[r];
    CHECK(yi != yj);

    // prototype row is the convex combination of its source prototypes
    const Eigen::VectorXd expect =
        lambda * bundle.prototype(yi).vector.cast<double>() +
        (1.0 - lambda) * bundle.prototype(yj).vector.cast<double>();
    CHECK((batch.prototypes.row(r).transpose() - expect).cwiseAbs().maxCoeff() < 1e-12);

    // soft label is two-hot with masses lambda and 1 - lambda
    CHECK(batch.soft_labels.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    int nonzero = 0;
    for (int k = 0; k < batch.soft_labels.cols(); ++k) {
      const double mass = batch.soft_labels(r, k);
      CHECK(mass >= 0.0);
      if (mass > 0.0) ++nonzero;
      const int class_id = batch.pool_class_ids[static_cast<size_t>(k)];
      if (class_id == yi) CHECK(mass == doctest::Approx(lambda).epsilon(1e-12));
      if (class_id == yj) CHECK(mass == doctest::Approx(1.0 - lambda).epsilon(1e-12));
    }
    CHECK(nonzero <= 2);
  }
}

TEST_CASE("per-minibatch scope shares one lambda, per-sample varies") {
  DatasetBundle bundle = generate_synthetic_bundle(4, 2, 5, 4, 3, 0.05, 3);
  RandomStream rng(55);
  AmbiguousBatch shared = make_ambiguous_batch(bundle, parse_pool("seen"),
                                               parse_lambda_policy("beta:0.3,0.3@batch"),
                                               32, rng);
  const double first = shared.lambdas.front();
  CHECK(std::all_of(shared.lambdas.begin(), shared.lambdas.end(),
                    [&](double l) { return l == first; }));

  AmbiguousBatch varied = make_ambiguous_batch(bundle, parse_pool("seen"),
                                               parse_lambda_policy("beta:0.3,0.3@sample"),
                                               32, rng);
  std::set<double> distinct(varied.lambdas.begin(), varied.lambdas.end());
  CHECK(distinct.size() > 1);
}

TEST_CASE("pool exclusivity shows in the bundle's prototype counters") {
  DatasetBundle bundle = generate_synthetic_bundle(4, 3, 5, 4, 3, 0.05, 17);
  RandomStream rng(21);

  bundle.reset_access_stats();
  (void)make_ambiguous_batch(bundle, parse_pool("seen"),
                             parse_lambda_policy("uniform:0,1"), 40, rng);
  CHECK(bundle.access_stats().unseen_prototype_reads == 0);
  CHECK(bundle.access_stats().seen_prototype_reads > 0);

  bundle.reset_access_stats();
  (void)make_ambiguous_batch(bundle, parse_pool("unseen"),
                             parse_lambda_policy("uniform:0,1"), 40, rng);
  CHECK(bundle.access_stats().seen_prototype_reads == 0);
  CHECK(bundle.access_stats().unseen_prototype_reads > 0);
}

TEST_CASE("degenerate lambdas reproduce the pure source prototypes") {
  DatasetBundle bundle = generate_synthetic_bundle(3, 2, 4, 3, 2, 0.05, 29);
  RandomStream rng(31);
  for (double lambda : {0.0, 1.0}) {
    char text[32];
    std::snprintf(text, sizeof(text), "fixed:%g", lambda);
    AmbiguousBatch batch = make_ambiguous_batch(bundle, parse_pool("both"),
                                                parse_lambda_policy(text), 16, rng);
    for (int r = 0; r < 16; ++r) {
      const auto [yi, yj] = batch.source_pairs[r];
      const int pure = lambda == 1.0 ? yi : yj;
      CHECK((batch.prototypes.row(r).transpose() -
             bundle.prototype(pure).vector.cast<double>())
                .cwiseAbs()
                .maxCoeff() == 0.0);
      // the soft label collapses to one-hot on the surviving class
      for (int k = 0; k < batch.soft_labels.cols(); ++k) {
        const int id = batch.pool_class_ids[static_cast<size_t>(k)];
        CHECK(batch.soft_labels(r, k) == (id == pure ? 1.0 : 0.0));
      }
    }
  }
}

TEST_CASE("small pools are rejected") {
  DatasetBundle bundle = generate_synthetic_bundle(2, 1, 4, 3, 2, 0.05, 41);
  RandomStream rng(43);
  CHECK_THROWS_WITH(make_ambiguous_batch(bundle, parse_pool("unseen"),
                                         parse_lambda_policy("fixed:0.5"), 8, rng),
                    doctest::Contains("pool with < 2 classes"));
}

TEST_CASE("visual mixup pair mixes samples and prototypes together") {
  Eigen::VectorXd x_i = Eigen::VectorXd::Constant(4, 1.0);
  Eigen::VectorXd x_j = Eigen::VectorXd::Zero(4);
  ClassPrototype c_i{1, Eigen::VectorXf::Constant(3, 1.0f)};
  ClassPrototype c_j{2, Eigen::VectorXf::Zero(3)};

  auto [x, c] = visual_mixup_pair(x_i, x_j, c_i, c_j, 0.25);
  CHECK((x - Eigen::VectorXd::Constant(4, 0.25)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c - Eigen::VectorXd::Constant(3, 0.25)).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd short_x = Eigen::VectorXd::Zero(3);
  CHECK_THROWS(visual_mixup_pair(x_i, short_x, c_i, c_j, 0.5));
}
