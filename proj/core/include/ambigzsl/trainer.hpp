#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/losses.hpp"
#include "ambigzsl/mixer.hpp"
#include "ambigzsl/nets.hpp"

namespace ambigzsl {

enum class TrainMode { kInductive, kTransductive };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

// Every knob of a training run. Serializes to JSON with these exact field
// names. z_dim = 0 means "use the prototype dimension". freeze_encoder is
// honored by regularize_pretrained only; semantic_decoder_weight > 0
// enables the optional prototype-reconstruction extension (its term is
// optimized but not part of LossReport).
struct TrainConfig {
  TrainMode mode = TrainMode::kInductive;
  double gamma = 10.0;
  double lambda_wgan = 10.0;
  int n_critic = 5;
  double lr = 1e-4;
  std::pair<double, double> adam_betas{0.5, 0.999};
  int epochs = 1;
  int batch_size = 64;
  int z_dim = 0;
  LambdaPolicy lambda_policy{};
  PoolSelector pool{};
  double ambiguity_weight = 1.0;
  double kl_weight = 1.0;
  int synth_per_unseen = 300;
  int synth_per_seen = 0;
  int clf_epochs = 20;
  uint64_t seed = 0;

  int hidden_dim = 4096;
  bool use_regularizer = true;
  bool freeze_encoder = false;
  double semantic_decoder_weight = 0.0;
};

void validate_config(const TrainConfig& config);
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& config, const std::filesystem::path& path);

struct TrainedModel {
  ModelParams params;
  TrainConfig config;
  std::vector<LossReport> loss_log;  // one entry per generator update
  int64_t critic_updates = 0;
  int64_t generator_updates = 0;
};

// Per-tensor Adam state; m and v are lazily sized on the first step.
struct AdamState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  int64_t t = 0;
};

void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps = 1e-8);

// Adversarial training: per outer step, n_critic critic updates (the
// conditional critic on seen pairs, plus the unconditional critic on
// unlabeled features in transductive mode), then one joint update of
// encoder, generator and the regularizer classifier. Deterministic given
// config.seed. If log is non-null every step is appended to it.
TrainedModel train(const DatasetBundle& bundle, const TrainConfig& config,
                   LossLog* log = nullptr);

// Same loop, but the encoder and generator start from a pretrained model
// while both critics and the regularizer classifier are re-initialized.
// config.freeze_encoder keeps the encoder fixed.
TrainedModel regularize_pretrained(const ModelParams& pretrained,
                                   const DatasetBundle& bundle, const TrainConfig& config,
                                   LossLog* log = nullptr);

// n_per_class draws of G([z; c(y)]) per class, labels in declared class
// order. Deterministic per seed.
LabeledFeatures synthesize_features(const TrainedModel& model, const DatasetBundle& bundle,
                                    const std::vector<int>& class_ids, int n_per_class,
                                    uint64_t seed);

// Softmax cross-entropy training of a linear classifier over
// target_classes. Every target class must be present in the data.
LinearClassifier fit_final_classifier(const LabeledFeatures& data,
                                      const std::vector<int>& target_classes,
                                      int clf_epochs, double lr, uint64_t seed);

}  // namespace ambigzsl
