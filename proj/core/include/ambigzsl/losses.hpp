#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <optional>
#include <utility>

#include "ambigzsl/autodiff.hpp"
#include "ambigzsl/mixer.hpp"
#include "ambigzsl/nets.hpp"
#include "ambigzsl/rng.hpp"

namespace ambigzsl {

// One training step's objective breakdown. l_kl and l_i carry their
// configured weights already, so total is always the plain weighted sum
// total = l_bce + l_kl + gamma * l_wgan_s + l_wgan_u + l_i.
struct LossReport {
  double l_bce = 0.0;
  double l_kl = 0.0;
  double l_wgan_s = 0.0;
  double l_wgan_u = 0.0;  // stays 0 in inductive mode
  double l_i = 0.0;
  double total = 0.0;
};

double total_loss(const LossReport& parts, double gamma);

// -sum_k target_k * log softmax(logits)_k with a log-sum-exp stabilizer.
// target must lie on the probability simplex within 1e-6.
double soft_cross_entropy(const Eigen::VectorXd& logits, const Eigen::VectorXd& target);

// Mean soft cross-entropy between f(G([z; c~])) and the batch's soft
// labels, one fresh z ~ N(0, I) per row.
double ambiguity_loss(const Mlp& generator, const Mlp& classifier,
                      const AmbiguousBatch& batch, RandomStream& rng);

// Single-sample VAE terms: (mean binary cross-entropy of the
// reconstruction, KL(N(mu, sigma^2) || N(0, I))). x must lie in [0,1]^d.
std::pair<double, double> vae_loss(const Mlp& encoder, const Mlp& generator,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                                   RandomStream& rng);

// (critic_loss, generator_loss) with the interpolate gradient penalty.
// c_batch present means the conditional critic: the penalty gradient is
// taken w.r.t. the joint [interpolate; c] input.
std::pair<double, double> wgan_loss(const Mlp& critic, const Eigen::MatrixXd& real_batch,
                                    const Eigen::MatrixXd& fake_batch,
                                    const std::optional<Eigen::MatrixXd>& c_batch,
                                    double lambda_wgan, RandomStream& rng);

inline constexpr double kGradPenaltyEps = 1e-8;

// Tape builders over batches; all return 1x1 vars.
Var soft_cross_entropy_tape(Tape& tape, Var logits, Var targets);
Var bce_from_logits_tape(Tape& tape, Var logits, Var targets);
Var kl_divergence_tape(Tape& tape, Var mu, Var log_var);
// mean (||d D(u)/du||_2 - 1)^2 where u = interpolates (insert as a leaf so
// the gradient can be taken w.r.t. it). Differentiable w.r.t. the critic
// parameters, which is what the critic update needs.
Var gradient_penalty_tape(Tape& tape, const MLPSpec& critic_spec, const MLPVars& critic,
                          Var interpolates);

// Appends one record per optimization step to a CSV file with the fixed
// column order step,l_bce,l_kl,l_wgan_s,l_wgan_u,l_i,total,wall_clock_s.
class LossLog {
 public:
  explicit LossLog(const std::filesystem::path& path);
  void append(int64_t step, const LossReport& report, double wall_clock_seconds);

 private:
  std::ofstream out_;
};

}  // namespace ambigzsl
