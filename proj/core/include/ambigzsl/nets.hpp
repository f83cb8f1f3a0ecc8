#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ambigzsl/autodiff.hpp"
#include "ambigzsl/rng.hpp"

namespace ambigzsl {

enum class OutputActivation { kNone, kSigmoid };

// Two fully connected layers with a leaky-rectifier hidden activation.
struct MLPSpec {
  int in_dim = 1;
  int hidden_dim = 1;
  int out_dim = 1;
  double hidden_slope = 0.2;
  OutputActivation output_activation = OutputActivation::kNone;
};

void validate_spec(const MLPSpec& spec);
int param_count(const MLPSpec& spec);

// Biases are 1-row matrices so they broadcast over batch rows.
struct MLPParams {
  Eigen::MatrixXd w1;
  Eigen::MatrixXd b1;
  Eigen::MatrixXd w2;
  Eigen::MatrixXd b2;
};

MLPParams init_mlp(const MLPSpec& spec, RandomStream& rng, double weight_stddev = 0.02);

// Tape handles for one network's parameters.
struct MLPVars {
  Var w1, b1, w2, b2;
};

// Inserts parameters as differentiation leaves (trainable) or constants
// (frozen).
MLPVars attach(Tape& tape, const MLPParams& params);
MLPVars attach_frozen(Tape& tape, const MLPParams& params);

// Batched forward; rows of x are samples.
Var mlp_apply(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x);
Eigen::MatrixXd mlp_eval(const MLPSpec& spec, const MLPParams& params,
                         const Eigen::MatrixXd& x);

struct Mlp {
  MLPSpec spec;
  MLPParams params;
};

// The five networks of the synthesis model. The encoder emits (μ, log σ²)
// stacked along columns; the generator consumes [z; c] and squashes its
// output through a sigmoid; both discriminators emit one unbounded score.
struct ModelParams {
  Mlp encoder;
  Mlp generator;
  Mlp disc_cond;
  Mlp disc_uncond;
  Mlp reg_classifier;
  int z_dim = 0;

  int feature_dim() const { return generator.spec.out_dim; }
  int prototype_dim() const { return generator.spec.in_dim - z_dim; }
  int pool_size() const { return reg_classifier.spec.out_dim; }
};

ModelParams init_model(int feature_dim, int prototype_dim, int z_dim, int hidden_dim,
                       int pool_size, RandomStream& rng);

// log σ² is clamped to this range before exponentiation.
inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 30.0;

struct EncodeResult {
  Eigen::VectorXd z;
  Eigen::VectorXd mu;
  Eigen::VectorXd log_var;
};

// Reparameterized draw z = μ + σ·ε with ε ~ N(0, I) from rng.
EncodeResult encode(const ModelParams& params, const Eigen::VectorXd& x,
                    RandomStream& rng);

Eigen::VectorXd generate(const ModelParams& params, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& c);

// Conditional critic when c is present, unconditional otherwise.
double discriminate(const ModelParams& params, const Eigen::VectorXd& x,
                    const std::optional<Eigen::VectorXd>& c = std::nullopt);

Eigen::VectorXd classify_reg(const ModelParams& params, const Eigen::VectorXd& x);

// Tape-building counterparts used by the trainer; all take batches.
struct EncodeVars {
  Var z, mu, log_var;
};
EncodeVars encode_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x,
                       const Eigen::MatrixXd& epsilon);
Var generate_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var z, Var c);
Var discriminate_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var input);
Var classify_reg_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x);

// Affine scorer over a fixed class list; columns follow class_ids order.
struct LinearClassifier {
  Eigen::MatrixXd weight;  // d x n_classes
  Eigen::VectorXd bias;
  std::vector<int> class_ids;
};

LinearClassifier make_linear_classifier(int feature_dim, std::vector<int> class_ids);
Eigen::VectorXd classifier_scores(const LinearClassifier& clf, const Eigen::VectorXd& x);
// Argmax of affine scores; exact ties go to the lowest class id.
int predict(const LinearClassifier& clf, const Eigen::VectorXd& x);

// Checkpoint archive: schema tag, caller-supplied config document, and all
// parameter tensors under component.layer.kind keys.
inline constexpr int kCheckpointSchemaVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& config_json);

struct LoadedCheckpoint {
  ModelParams params;
  std::string config_json;
  int schema_version = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ambigzsl
