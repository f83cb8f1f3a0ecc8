#include "ambigzsl/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ambigzsl {
namespace {

void check_simplex(const Eigen::VectorXd& target) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < target.size(); ++k) {
    if (target(k) < -1e-6)
      throw std::invalid_argument("soft_cross_entropy: negative target mass " +
                                  std::to_string(target(k)));
    sum += target(k);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("soft_cross_entropy: target mass " + std::to_string(sum) +
                                " is not 1");
}

}  // namespace

double total_loss(const LossReport& parts, double gamma) {
  return parts.l_bce + parts.l_kl + gamma * parts.l_wgan_s + parts.l_wgan_u + parts.l_i;
}

double soft_cross_entropy(const Eigen::VectorXd& logits, const Eigen::VectorXd& target) {
  if (logits.size() != target.size())
    throw std::invalid_argument("soft_cross_entropy: dimension mismatch");
  if (logits.size() == 0) throw std::invalid_argument("soft_cross_entropy: empty input");
  check_simplex(target);
  const double m = logits.maxCoeff();
  const double lse = std::log((logits.array() - m).exp().sum());
  // With shifted logits s = logits - m, CE = log sum exp(s) - sum t_k s_k.
  return lse - (target.array() * (logits.array() - m)).sum();
}

double ambiguity_loss(const Mlp& generator, const Mlp& classifier,
                      const AmbiguousBatch& batch, RandomStream& rng) {
  const int a = static_cast<int>(batch.prototypes.cols());
  const int z_dim = generator.spec.in_dim - a;
  if (z_dim < 1)
    throw std::invalid_argument("ambiguity_loss: prototype dimension leaves no noise input");
  if (classifier.spec.in_dim != generator.spec.out_dim)
    throw std::invalid_argument("ambiguity_loss: classifier input does not match generator output");
  if (classifier.spec.out_dim != static_cast<int>(batch.soft_labels.cols()))
    throw std::invalid_argument("ambiguity_loss: classifier has " +
                                std::to_string(classifier.spec.out_dim) +
                                " classes, batch pool has " +
                                std::to_string(batch.soft_labels.cols()));

  const Eigen::Index b = batch.prototypes.rows();
  Eigen::MatrixXd in(b, generator.spec.in_dim);
  for (Eigen::Index r = 0; r < b; ++r) {
    for (int k = 0; k < z_dim; ++k) in(r, k) = rng.normal();
    in.row(r).tail(a) = batch.prototypes.row(r);
  }
  Eigen::MatrixXd synth = mlp_eval(generator.spec, generator.params, in);
  Eigen::MatrixXd logits = mlp_eval(classifier.spec, classifier.params, synth);

  double sum = 0.0;
  for (Eigen::Index r = 0; r < b; ++r)
    sum += soft_cross_entropy(logits.row(r), batch.soft_labels.row(r));
  return sum / static_cast<double>(b);
}

std::pair<double, double> vae_loss(const Mlp& encoder, const Mlp& generator,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                                   RandomStream& rng) {
  if (static_cast<int>(x.size()) != encoder.spec.in_dim)
    throw std::invalid_argument("vae_loss: feature dimension mismatch");
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x(i) >= 0.0 && x(i) <= 1.0))
      throw std::invalid_argument("vae_loss: feature outside [0,1] at dimension " +
                                  std::to_string(i));
  const int z_dim = encoder.spec.out_dim / 2;
  if (static_cast<int>(c.size()) != generator.spec.in_dim - z_dim)
    throw std::invalid_argument("vae_loss: prototype dimension mismatch");

  Eigen::MatrixXd enc = mlp_eval(encoder.spec, encoder.params, x.transpose());
  Eigen::VectorXd mu = enc.row(0).head(z_dim);
  Eigen::VectorXd log_var = enc.row(0).tail(z_dim).unaryExpr(
      [](double v) { return std::clamp(v, kLogVarMin, kLogVarMax); });

  Eigen::MatrixXd gen_in(1, generator.spec.in_dim);
  for (int k = 0; k < z_dim; ++k)
    gen_in(0, k) = mu(k) + std::exp(0.5 * log_var(k)) * rng.normal();
  gen_in.row(0).tail(c.size()) = c.transpose();

  // BCE from pre-sigmoid logits: -log sigmoid(u) = softplus(-u).
  MLPSpec logits_spec = generator.spec;
  logits_spec.output_activation = OutputActivation::kNone;
  Eigen::MatrixXd u = mlp_eval(logits_spec, generator.params, gen_in);
  double bce = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double uj = u(0, j);
    const double softplus_neg = std::log1p(std::exp(-std::abs(uj))) + std::max(-uj, 0.0);
    const double softplus_pos = std::log1p(std::exp(-std::abs(uj))) + std::max(uj, 0.0);
    bce += x(j) * softplus_neg + (1.0 - x(j)) * softplus_pos;
  }
  bce /= static_cast<double>(x.size());

  double kl = 0.0;
  for (int k = 0; k < z_dim; ++k)
    kl += mu(k) * mu(k) + std::exp(log_var(k)) - log_var(k) - 1.0;
  kl *= 0.5;
  return {bce, kl};
}

std::pair<double, double> wgan_loss(const Mlp& critic, const Eigen::MatrixXd& real_batch,
                                    const Eigen::MatrixXd& fake_batch,
                                    const std::optional<Eigen::MatrixXd>& c_batch,
                                    double lambda_wgan, RandomStream& rng) {
  if (real_batch.rows() != fake_batch.rows() || real_batch.cols() != fake_batch.cols())
    throw std::invalid_argument("wgan_loss: real/fake batch size mismatch");
  if (real_batch.rows() == 0) throw std::invalid_argument("wgan_loss: empty batch");
  if (c_batch && c_batch->rows() != real_batch.rows())
    throw std::invalid_argument("wgan_loss: prototype batch size mismatch");
  const int expected_in =
      static_cast<int>(real_batch.cols() + (c_batch ? c_batch->cols() : 0));
  if (critic.spec.in_dim != expected_in)
    throw std::invalid_argument("wgan_loss: critic input dimension mismatch");

  const Eigen::Index n = real_batch.rows();
  Eigen::MatrixXd interp(n, real_batch.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double alpha = rng.uniform();
    interp.row(r) = alpha * real_batch.row(r) + (1.0 - alpha) * fake_batch.row(r);
  }

  Tape tape;
  MLPVars d = attach_frozen(tape, critic.params);
  auto with_condition = [&](const Eigen::MatrixXd& x) {
    if (!c_batch) return x;
    Eigen::MatrixXd joined(x.rows(), x.cols() + c_batch->cols());
    joined << x, *c_batch;
    return joined;
  };
  Var u = tape.leaf(with_condition(interp));
  Var penalty = gradient_penalty_tape(tape, critic.spec, d, u);

  Var score_real =
      tape.mean_all(mlp_apply(tape, critic.spec, d, tape.constant(with_condition(real_batch))));
  Var score_fake =
      tape.mean_all(mlp_apply(tape, critic.spec, d, tape.constant(with_condition(fake_batch))));

  const double critic_loss = tape.scalar_value(score_fake) - tape.scalar_value(score_real) +
                             lambda_wgan * tape.scalar_value(penalty);
  const double generator_loss = -tape.scalar_value(score_fake);
  return {critic_loss, generator_loss};
}

Var soft_cross_entropy_tape(Tape& tape, Var logits, Var targets) {
  const Eigen::MatrixXd& lv = tape.value(logits);
  const Eigen::Index n = lv.rows();
  const Eigen::Index k = lv.cols();
  if (tape.value(targets).rows() != n || tape.value(targets).cols() != k)
    throw std::invalid_argument("soft_cross_entropy_tape: shape mismatch");
  // Detached row maxima; the softmax gradient is unchanged by the shift.
  Eigen::MatrixXd row_max(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) row_max(r, 0) = lv.row(r).maxCoeff();
  Var shifted = tape.sub(logits, tape.broadcast_col(tape.constant(row_max), k));
  Var lse = tape.log(tape.row_sum(tape.exp(shifted)));  // n x 1
  Var dot = tape.row_sum(tape.mul(targets, shifted));   // n x 1
  return tape.mean_all(tape.sub(lse, dot));
}

Var bce_from_logits_tape(Tape& tape, Var logits, Var targets) {
  const Eigen::MatrixXd& lv = tape.value(logits);
  if (tape.value(targets).rows() != lv.rows() || tape.value(targets).cols() != lv.cols())
    throw std::invalid_argument("bce_from_logits_tape: shape mismatch");
  // x*softplus(-u) + (1-x)*softplus(u), averaged over every entry.
  Var sp_neg = tape.softplus(tape.scale(logits, -1.0));
  Var sp_pos = tape.softplus(logits);
  Var one_minus = tape.add_scalar(tape.scale(targets, -1.0), 1.0);
  return tape.mean_all(tape.add(tape.mul(targets, sp_neg), tape.mul(one_minus, sp_pos)));
}

Var kl_divergence_tape(Tape& tape, Var mu, Var log_var) {
  const Eigen::MatrixXd& mv = tape.value(mu);
  if (tape.value(log_var).rows() != mv.rows() || tape.value(log_var).cols() != mv.cols())
    throw std::invalid_argument("kl_divergence_tape: shape mismatch");
  Var term = tape.add_scalar(
      tape.sub(tape.add(tape.mul(mu, mu), tape.exp(log_var)), log_var), -1.0);
  Var per_sample = tape.scale(tape.row_sum(term), 0.5);  // n x 1
  return tape.mean_all(per_sample);
}

Var gradient_penalty_tape(Tape& tape, const MLPSpec& critic_spec, const MLPVars& critic,
                          Var interpolates) {
  if (!tape.requires_grad(interpolates))
    throw std::invalid_argument("gradient_penalty_tape: interpolates must be a leaf");
  Var scores = mlp_apply(tape, critic_spec, critic, interpolates);
  Var grad = tape.gradient(tape.sum_all(scores), {interpolates})[0];
  Var norm = tape.sqrt(tape.add_scalar(tape.row_sum(tape.mul(grad, grad)),
                                       kGradPenaltyEps));
  Var deviation = tape.add_scalar(norm, -1.0);
  return tape.mean_all(tape.mul(deviation, deviation));
}

LossLog::LossLog(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write loss log " + path.string());
  out_ << "step,l_bce,l_kl,l_wgan_s,l_wgan_u,l_i,total,wall_clock_s\n";
}

void LossLog::append(int64_t step, const LossReport& report, double wall_clock_seconds) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f\n",
                static_cast<long long>(step), report.l_bce, report.l_kl, report.l_wgan_s,
                report.l_wgan_u, report.l_i, report.total, wall_clock_seconds);
  out_ << buf;
  out_.flush();
}

}  // namespace ambigzsl
