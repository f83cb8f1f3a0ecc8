#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "ambigzsl/dataset.hpp"
#include "test_util.hpp"

using namespace ambigzsl;

namespace {

// 4 samples (3 labeled from seen classes 1/2, 1 withheld from unseen 9),
// d=2, a=3.
DatasetBundle tiny_bundle() {
  Eigen::MatrixXf features(4, 2);
  features << 0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f;
  std::vector<int> labels{1, 1, 2, 9};
  std::vector<ClassPrototype> prototypes;
  for (int id : {1, 2, 9}) {
    ClassPrototype p;
    p.class_id = id;
    p.vector = Eigen::VectorXf::Constant(3, 0.1f * static_cast<float>(id));
    prototypes.push_back(p);
  }
  SplitSpec split{{1, 2}, {9}};
  NormalizationStats norm{Eigen::VectorXf::Zero(2), Eigen::VectorXf::Ones(2)};
  return DatasetBundle("tiny", features, labels, 3, prototypes, split, norm);
}

bool contains(const std::vector<std::string>& violations, const std::string& needle) {
  return std::any_of(violations.begin(), violations.end(), [&](const std::string& v) {
    return v.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("split membership is sorted binary search") {
  SplitSpec split{{1, 3, 5}, {2, 8}};
  CHECK(split.is_seen(3));
  CHECK_FALSE(split.is_seen(2));
  CHECK(split.is_unseen(8));
  CHECK_FALSE(split.is_unseen(5));
  CHECK_FALSE(split.is_seen(4));
  CHECK_FALSE(split.is_unseen(4));
}

TEST_CASE("bundle accessors and the label guard") {
  DatasetBundle bundle = tiny_bundle();
  CHECK(bundle.total_count() == 4);
  CHECK(bundle.labeled_count() == 3);
  CHECK(bundle.feature_dim() == 2);
  CHECK(bundle.prototype_dim() == 3);

  CHECK(bundle.feature(0)(0) == doctest::Approx(0.1));
  CHECK(bundle.train_label(2) == 2);
  CHECK_THROWS(bundle.train_label(3));  // withheld
  CHECK(bundle.eval_label(3) == 9);

  Eigen::MatrixXd batch = bundle.features_batch({2, 0});
  CHECK(batch.rows() == 2);
  CHECK(batch(0, 1) == doctest::Approx(0.6));
  CHECK(batch(1, 0) == doctest::Approx(0.1));
}

TEST_CASE("access counters see withheld reads and prototype sides") {
  DatasetBundle bundle = tiny_bundle();
  AccessStats before = bundle.access_stats();
  CHECK(before.unlabeled_feature_reads == 0);
  CHECK(before.unlabeled_label_reads == 0);

  (void)bundle.feature(1);  // labeled region, not counted
  (void)bundle.feature(3);
  (void)bundle.features_batch({3, 3});
  (void)bundle.eval_label(0);  // labeled region, not counted
  (void)bundle.eval_label(3);
  (void)bundle.prototype(1);
  (void)bundle.prototype(9);
  (void)bundle.prototype(9);

  AccessStats after = bundle.access_stats();
  CHECK(after.unlabeled_feature_reads == 3);
  CHECK(after.unlabeled_label_reads == 1);
  CHECK(after.seen_prototype_reads == 1);
  CHECK(after.unseen_prototype_reads == 2);

  bundle.reset_access_stats();
  AccessStats reset = bundle.access_stats();
  CHECK(reset.unlabeled_feature_reads == 0);
  CHECK(reset.unseen_prototype_reads == 0);

  DatasetBundle copy = bundle;
  (void)copy.prototype(9);
  CHECK(copy.access_stats().unseen_prototype_reads == 1);
  CHECK(bundle.access_stats().unseen_prototype_reads == 0);
}

TEST_CASE("prototype lookup errors name the class") {
  DatasetBundle bundle = tiny_bundle();
  CHECK_THROWS_WITH(bundle.prototype(4), doctest::Contains("no prototype for class 4"));
  Eigen::MatrixXd protos = bundle.prototype_matrix({9, 1});
  CHECK(protos.rows() == 2);
  CHECK(protos(0, 0) == doctest::Approx(0.9));
  CHECK(protos(1, 2) == doctest::Approx(0.1));
}

TEST_CASE("validate_bundle reports each violation") {
  Eigen::MatrixXf features(4, 2);
  features << 0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f;
  std::vector<ClassPrototype> prototypes;
  for (int id : {1, 2, 9}) {
    ClassPrototype p;
    p.class_id = id;
    p.vector = Eigen::VectorXf::Constant(3, 0.5f);
    prototypes.push_back(p);
  }
  NormalizationStats norm{Eigen::VectorXf::Zero(2), Eigen::VectorXf::Ones(2)};

  SUBCASE("valid bundle has no violations") {
    DatasetBundle bundle = tiny_bundle();
    CHECK(validate_bundle(bundle).empty());
  }
  SUBCASE("unsorted seen list") {
    DatasetBundle bundle("x", features, {1, 1, 2, 9}, 3, prototypes, {{2, 1}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle),
                   "seen class list not sorted ascending without duplicates"));
  }
  SUBCASE("overlapping split") {
    DatasetBundle bundle("x", features, {1, 1, 2, 2}, 3, prototypes, {{1, 2}, {2, 9}},
                         norm);
    CHECK(contains(validate_bundle(bundle), "non-disjoint split: class 2"));
  }
  SUBCASE("unseen class inside the labeled region") {
    DatasetBundle bundle("x", features, {1, 9, 2, 9}, 3, prototypes, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "labeled region contains unseen class 9"));
  }
  SUBCASE("seen class inside the unlabeled region") {
    DatasetBundle bundle("x", features, {1, 1, 2, 2}, 3, prototypes, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "unlabeled region contains seen class 2"));
  }
  SUBCASE("label outside the split") {
    DatasetBundle bundle("x", features, {1, 7, 2, 9}, 3, prototypes, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "label 7 at row 1 is outside the split"));
  }
  SUBCASE("non-finite feature") {
    Eigen::MatrixXf bad = features;
    bad(2, 1) = std::numeric_limits<float>::quiet_NaN();
    DatasetBundle bundle("x", bad, {1, 1, 2, 9}, 3, prototypes, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "non-finite feature at index (2, 1)"));
  }
  SUBCASE("missing prototype") {
    std::vector<ClassPrototype> fewer{prototypes[0], prototypes[2]};
    DatasetBundle bundle("x", features, {1, 1, 2, 9}, 3, fewer, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "class without prototype: 2"));
  }
  SUBCASE("prototype dimension mismatch") {
    std::vector<ClassPrototype> uneven = prototypes;
    uneven[1].vector = Eigen::VectorXf::Constant(2, 0.5f);
    DatasetBundle bundle("x", features, {1, 1, 2, 9}, 3, uneven, {{1, 2}, {9}}, norm);
    CHECK(contains(validate_bundle(bundle), "prototype dimension mismatch for class 2"));
  }
}

TEST_CASE("save then load round-trips a synthetic bundle exactly") {
  testutil::ScratchDir dir("bundle_roundtrip");
  DatasetBundle bundle = generate_synthetic_bundle(4, 2, 6, 3, 5, 0.1, 21);
  save_bundle(bundle, dir.path());

  DatasetBundle loaded = load_dataset_dir(dir.path(), "reloaded");
  CHECK(loaded.total_count() == bundle.total_count());
  CHECK(loaded.labeled_count() == bundle.labeled_count());
  CHECK(loaded.features_raw() == bundle.features_raw());
  CHECK(loaded.labels_raw() == bundle.labels_raw());
  REQUIRE(loaded.prototypes_raw().size() == bundle.prototypes_raw().size());
  for (const auto& [id, proto] : bundle.prototypes_raw())
    CHECK(loaded.prototype(id).vector == proto.vector);
  CHECK(loaded.split().seen_classes == bundle.split().seen_classes);
  CHECK(loaded.split().unseen_classes == bundle.split().unseen_classes);
}

TEST_CASE("loading normalizes only dimensions outside the unit interval") {
  testutil::ScratchDir dir("bundle_norm");
  {
    std::ofstream f(dir.path() / "features.csv");
    // column 0 already in [0,1]; column 1 spans [-1, 3]
    f << "0.25,-1\n0.5,3\n0.75,1\n";
    std::ofstream l(dir.path() / "labels.csv");
    l << "1\n1\n5\n";
    std::ofstream p(dir.path() / "prototypes.csv");
    p << "1,0.2\n5,0.8\n";
    std::ofstream s(dir.path() / "split.json");
    s << R"({"seen":[1],"unseen":[5],"n_labeled":2,"d":2,"a":1})";
  }
  DatasetBundle bundle = load_dataset_dir(dir.path(), "norm");
  CHECK(bundle.feature(0)(0) == doctest::Approx(0.25));  // untouched
  CHECK(bundle.feature(1)(0) == doctest::Approx(0.5));
  CHECK(bundle.feature(0)(1) == doctest::Approx(0.0));  // rescaled from -1
  CHECK(bundle.feature(1)(1) == doctest::Approx(1.0));  // rescaled from 3
  CHECK(bundle.feature(2)(1) == doctest::Approx(0.5));  // rescaled from 1
  CHECK(bundle.normalization().lo(1) == doctest::Approx(-1.0));
  CHECK(bundle.normalization().hi(1) == doctest::Approx(3.0));
}

TEST_CASE("loading errors name the offending file or field") {
  testutil::ScratchDir dir("bundle_errors");
  CHECK_THROWS_WITH(load_dataset_dir(dir.path(), "missing"),
                    doctest::Contains("missing file"));

  {
    std::ofstream f(dir.path() / "features.csv");
    f << "0.1,0.2\n";
    std::ofstream l(dir.path() / "labels.csv");
    l << "1\n";
    std::ofstream p(dir.path() / "prototypes.csv");
    p << "1,0.5\n";
    std::ofstream s(dir.path() / "split.json");
    s << R"({"seen":[1],"unseen":[],"d":2,"a":1})";  // n_labeled missing
  }
  CHECK_THROWS_WITH(load_dataset_dir(dir.path(), "broken"),
                    doctest::Contains("n_labeled"));
}

TEST_CASE("invalid dataset errors list every violation") {
  testutil::ScratchDir dir("bundle_invalid");
  {
    std::ofstream f(dir.path() / "features.csv");
    f << "0.1,0.2\n0.3,0.4\n";
    std::ofstream l(dir.path() / "labels.csv");
    l << "1\n7\n";  // 7 is outside the split
    std::ofstream p(dir.path() / "prototypes.csv");
    p << "1,0.5\n5,0.6\n";
    std::ofstream s(dir.path() / "split.json");
    s << R"({"seen":[1],"unseen":[5],"n_labeled":1,"d":2,"a":1})";
  }
  CHECK_THROWS_WITH(load_dataset_dir(dir.path(), "bad"),
                    doctest::Contains("invalid dataset 'bad'"));
}

TEST_CASE("synthetic bundle shape, determinism, and cluster structure") {
  DatasetBundle a = generate_synthetic_bundle(5, 3, 16, 8, 40, 0.05, 7);
  CHECK(a.name() == "synthetic");
  CHECK(a.total_count() == 8 * 40);
  CHECK(a.labeled_count() == 5 * 40);
  CHECK(a.feature_dim() == 16);
  CHECK(a.prototype_dim() == 8);
  CHECK(a.split().seen_classes == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(a.split().unseen_classes == std::vector<int>{6, 7, 8});

  // all features in [0, 1], labeled region seen-only, withheld unseen-only
  CHECK(a.features_raw().minCoeff() >= 0.0f);
  CHECK(a.features_raw().maxCoeff() <= 1.0f);
  for (Eigen::Index i = 0; i < a.labeled_count(); ++i)
    CHECK(a.split().is_seen(a.train_label(i)));
  for (Eigen::Index i = a.labeled_count(); i < a.total_count(); ++i)
    CHECK(a.split().is_unseen(a.eval_label(i)));

  DatasetBundle b = generate_synthetic_bundle(5, 3, 16, 8, 40, 0.05, 7);
  CHECK(a.features_raw() == b.features_raw());

  DatasetBundle c = generate_synthetic_bundle(5, 3, 16, 8, 40, 0.05, 8);
  CHECK(a.features_raw() != c.features_raw());

  // same-class rows sit closer to their class mean than to other means
  // for a comfortable majority (clusters are informative, not degenerate)
  std::map<int, Eigen::VectorXd> means;
  std::map<int, int> counts;
  for (Eigen::Index i = 0; i < a.total_count(); ++i) {
    const int y = a.eval_label(i);
    auto [it, fresh] = means.try_emplace(y, Eigen::VectorXd::Zero(16));
    it->second += a.feature(i);
    ++counts[y];
  }
  for (auto& [y, m] : means) m /= counts[y];
  int hits = 0;
  for (Eigen::Index i = 0; i < a.total_count(); ++i) {
    const int y = a.eval_label(i);
    double best = 1e300;
    int arg = -1;
    for (const auto& [cls, m] : means) {
      const double dist = (a.feature(i) - m).squaredNorm();
      if (dist < best) {
        best = dist;
        arg = cls;
      }
    }
    hits += arg == y;
  }
  CHECK(hits > a.total_count() * 9 / 10);
}
