#include "ambigzsl/pipeline.hpp"

#include <stdexcept>

namespace ambigzsl {
namespace {

LabeledFeatures slice(const DatasetBundle& bundle, Eigen::Index begin, Eigen::Index end,
                      bool withheld) {
  LabeledFeatures out;
  out.features.resize(end - begin, bundle.feature_dim());
  out.labels.reserve(static_cast<size_t>(end - begin));
  for (Eigen::Index i = begin; i < end; ++i) {
    out.features.row(i - begin) = bundle.feature(i).transpose();
    out.labels.push_back(withheld ? bundle.eval_label(i) : bundle.train_label(i));
  }
  return out;
}

void append(LabeledFeatures& dst, const LabeledFeatures& src) {
  if (src.features.rows() == 0) return;
  if (dst.features.rows() == 0) {
    dst = src;
    return;
  }
  Eigen::MatrixXd merged(dst.features.rows() + src.features.rows(), dst.features.cols());
  merged << dst.features, src.features;
  dst.features = std::move(merged);
  dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
}

}  // namespace

LabeledFeatures labeled_region(const DatasetBundle& bundle) {
  return slice(bundle, 0, bundle.labeled_count(), false);
}

LabeledFeatures withheld_region(const DatasetBundle& bundle) {
  return slice(bundle, bundle.labeled_count(), bundle.total_count(), true);
}

EvalOutcome evaluate_model(const TrainedModel& model, const DatasetBundle& bundle,
                           uint64_t seed) {
  if (bundle.labeled_count() == 0 || bundle.total_count() == bundle.labeled_count())
    throw std::invalid_argument(
        "evaluate_model: bundle needs both a labeled and a withheld region");

  const TrainConfig& cfg = model.config;
  const auto& seen_ids = bundle.split().seen_classes;
  const auto& unseen_ids = bundle.split().unseen_classes;
  const bool transductive = cfg.mode == TrainMode::kTransductive;

  LabeledFeatures seen_eval = labeled_region(bundle);
  LabeledFeatures unseen_eval = withheld_region(bundle);

  EvalOutcome out;

  {
    LabeledFeatures synth = synthesize_features(model, bundle, unseen_ids,
                                                cfg.synth_per_unseen,
                                                derive_stream_seed(seed, "synth-zsl"));
    LinearClassifier clf = fit_final_classifier(synth, unseen_ids, cfg.clf_epochs, cfg.lr,
                                                derive_stream_seed(seed, "clf-zsl"));
    std::vector<int> preds(unseen_eval.labels.size());
    for (Eigen::Index i = 0; i < unseen_eval.features.rows(); ++i)
      preds[static_cast<size_t>(i)] = predict(clf, unseen_eval.features.row(i).transpose());
    out.zsl.dataset = bundle.name();
    out.zsl.setting =
        transductive ? EvalSetting::kZslTransductive : EvalSetting::kZslInductive;
    out.zsl.t1 = per_class_top1(preds, unseen_eval.labels, unseen_ids);
  }

  {
    LabeledFeatures train_set = seen_eval;
    append(train_set, synthesize_features(model, bundle, unseen_ids, cfg.synth_per_unseen,
                                          derive_stream_seed(seed, "synth-gzsl")));
    if (cfg.synth_per_seen > 0)
      append(train_set,
             synthesize_features(model, bundle, seen_ids, cfg.synth_per_seen,
                                 derive_stream_seed(seed, "synth-gzsl-seen")));

    std::vector<int> all_ids;
    all_ids.reserve(seen_ids.size() + unseen_ids.size());
    all_ids.insert(all_ids.end(), seen_ids.begin(), seen_ids.end());
    all_ids.insert(all_ids.end(), unseen_ids.begin(), unseen_ids.end());

    LinearClassifier clf = fit_final_classifier(train_set, all_ids, cfg.clf_epochs, cfg.lr,
                                                derive_stream_seed(seed, "clf-gzsl"));
    GzslResult r = gzsl_eval(clf, seen_eval, unseen_eval);
    out.gzsl.dataset = bundle.name();
    out.gzsl.setting =
        transductive ? EvalSetting::kGzslTransductive : EvalSetting::kGzslInductive;
    out.gzsl.u = r.u;
    out.gzsl.s = r.s;
    out.gzsl.h = r.h;
  }
  return out;
}

}  // namespace ambigzsl
