#pragma once

#include <cstdint>

#include "ambigzsl/eval.hpp"
#include "ambigzsl/trainer.hpp"

namespace ambigzsl {

struct EvalOutcome {
  MetricsRecord zsl;
  MetricsRecord gzsl;
};

// Full evaluation protocol for a trained model on its bundle.
//
// ZSL: a classifier over the unseen classes is fitted on synthesized
// unseen features and scored on the bundle's withheld region. GZSL: a
// classifier over all classes is fitted on real labeled features plus
// synthesized unseen (and optionally seen) features; u is scored on the
// withheld region and s on the labeled region. Synthesis counts and
// classifier epochs/rate come from the model's config. Deterministic
// given seed.
EvalOutcome evaluate_model(const TrainedModel& model, const DatasetBundle& bundle,
                           uint64_t seed);

// Slice of the bundle's labeled region as an evaluation set.
LabeledFeatures labeled_region(const DatasetBundle& bundle);
// Slice of the withheld region, reading labels through the counted
// evaluation accessor.
LabeledFeatures withheld_region(const DatasetBundle& bundle);

}  // namespace ambigzsl
