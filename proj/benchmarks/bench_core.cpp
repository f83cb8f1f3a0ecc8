// Microbenchmarks for the paths the training loop spends its time in:
// virtual-class batch construction, the soft cross-entropy, generator
// forward passes, and one full critic update tape including the gradient
// penalty.

#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "ambigzsl/autodiff.hpp"
#include "ambigzsl/dataset.hpp"
#include "ambigzsl/losses.hpp"
#include "ambigzsl/mixer.hpp"
#include "ambigzsl/nets.hpp"
#include "ambigzsl/rng.hpp"
#include "ambigzsl/trainer.hpp"

using namespace ambigzsl;

namespace {

DatasetBundle bench_bundle() {
  return generate_synthetic_bundle(12, 6, 64, 16, 8, 0.05, 7);
}

void BM_AmbiguousBatch(benchmark::State& state) {
  const DatasetBundle bundle = bench_bundle();
  const LambdaPolicy policy = parse_lambda_policy("uniform:0,1@sample");
  const PoolSelector pool = parse_pool("both");
  const int batch_size = static_cast<int>(state.range(0));
  RandomStream rng(11);
  for (auto _ : state) {
    AmbiguousBatch batch = make_ambiguous_batch(bundle, pool, policy, batch_size, rng);
    benchmark::DoNotOptimize(batch.prototypes.data());
  }
  state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_AmbiguousBatch)->Arg(16)->Arg(64)->Arg(256);

void BM_SoftCrossEntropy(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RandomStream rng(12);
  Eigen::VectorXd logits(n), target = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) logits(i) = rng.normal(0.0, 2.0);
  target(0) = 0.4;
  target(n - 1) = 0.6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(soft_cross_entropy(logits, target));
  }
}
BENCHMARK(BM_SoftCrossEntropy)->Arg(16)->Arg(256)->Arg(2048);

void BM_GeneratorForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  RandomStream rng(13);
  ModelParams model = init_model(64, 16, 16, 256, 18, rng);
  Eigen::MatrixXd input(batch, 32);
  for (Eigen::Index r = 0; r < input.rows(); ++r)
    for (Eigen::Index c = 0; c < input.cols(); ++c) input(r, c) = rng.normal();
  for (auto _ : state) {
    Eigen::MatrixXd out = mlp_eval(model.generator.spec, model.generator.params, input);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(256);

// Builds the conditional critic's whole objective (scores plus interpolate
// gradient penalty) and differentiates it, mirroring one critic update.
void BM_CriticPenaltyStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int d = 64, a = 16;
  RandomStream rng(14);
  ModelParams model = init_model(d, a, 16, 256, 18, rng);
  Eigen::MatrixXd real(batch, d + a), fake(batch, d + a), interp(batch, d + a);
  for (int r = 0; r < batch; ++r)
    for (int c = 0; c < d + a; ++c) {
      real(r, c) = rng.uniform();
      fake(r, c) = rng.uniform();
      const double alpha = rng.uniform();
      interp(r, c) = alpha * real(r, c) + (1.0 - alpha) * fake(r, c);
    }

  const MLPSpec& spec = model.disc_cond.spec;
  for (auto _ : state) {
    Tape tape;
    MLPVars vars = attach(tape, model.disc_cond.params);
    Var score_fake =
        tape.mean_all(discriminate_tape(tape, spec, vars, tape.constant(fake)));
    Var score_real =
        tape.mean_all(discriminate_tape(tape, spec, vars, tape.constant(real)));
    Var penalty = gradient_penalty_tape(tape, spec, vars, tape.leaf(interp));
    Var loss = tape.add(tape.sub(score_fake, score_real), tape.scale(penalty, 10.0));
    std::vector<Var> grads = tape.gradient(loss, {vars.w1, vars.b1, vars.w2, vars.b2});
    benchmark::DoNotOptimize(tape.value(grads[0]).data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_CriticPenaltyStep)->Arg(16)->Arg(64);

void BM_AdamStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RandomStream rng(15);
  Eigen::MatrixXd param(n, n), grad(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      param(r, c) = rng.normal();
      grad(r, c) = rng.normal();
    }
  AdamState adam;
  for (auto _ : state) {
    adam_step(param, grad, adam, 1e-4, 0.5, 0.999);
    benchmark::DoNotOptimize(param.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_AdamStep)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
