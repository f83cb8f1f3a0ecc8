#include "ambigzsl/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "ambigzsl/log.hpp"

namespace ambigzsl {
namespace {

using nlohmann::json;

Eigen::MatrixXd draw_normal(RandomStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

struct MlpAdam {
  AdamState w1, b1, w2, b2;
};

void step_mlp(MLPParams& p, Tape& tape, const std::vector<Var>& grads, size_t at,
              MlpAdam& opt, const TrainConfig& cfg) {
  const Eigen::MatrixXd gw1 = tape.value(grads[at]);
  const Eigen::MatrixXd gb1 = tape.value(grads[at + 1]);
  const Eigen::MatrixXd gw2 = tape.value(grads[at + 2]);
  const Eigen::MatrixXd gb2 = tape.value(grads[at + 3]);
  adam_step(p.w1, gw1, opt.w1, cfg.lr, cfg.adam_betas.first, cfg.adam_betas.second);
  adam_step(p.b1, gb1, opt.b1, cfg.lr, cfg.adam_betas.first, cfg.adam_betas.second);
  adam_step(p.w2, gw2, opt.w2, cfg.lr, cfg.adam_betas.first, cfg.adam_betas.second);
  adam_step(p.b2, gb2, opt.b2, cfg.lr, cfg.adam_betas.first, cfg.adam_betas.second);
}

void push_vars(std::vector<Var>& wrt, const MLPVars& v) {
  wrt.push_back(v.w1);
  wrt.push_back(v.b1);
  wrt.push_back(v.w2);
  wrt.push_back(v.b2);
}

// One critic step: loss = mean D(fake) - mean D(real) + lambda * penalty,
// with the penalty gradient taken at the (already assembled) interpolate
// rows. Inputs carry the condition columns when the critic is conditional.
void critic_update(Mlp& critic, MlpAdam& opt, const Eigen::MatrixXd& real_in,
                   const Eigen::MatrixXd& fake_in, const Eigen::MatrixXd& interp_in,
                   const TrainConfig& cfg) {
  Tape tape;
  MLPVars dv = attach(tape, critic.params);
  Var u = tape.leaf(interp_in);
  Var penalty = gradient_penalty_tape(tape, critic.spec, dv, u);
  Var score_real = tape.mean_all(mlp_apply(tape, critic.spec, dv, tape.constant(real_in)));
  Var score_fake = tape.mean_all(mlp_apply(tape, critic.spec, dv, tape.constant(fake_in)));
  Var loss = tape.add(tape.sub(score_fake, score_real),
                      tape.scale(penalty, cfg.lambda_wgan));
  auto grads = tape.gradient(loss, {dv.w1, dv.b1, dv.w2, dv.b2});
  step_mlp(critic.params, tape, grads, 0, opt, cfg);
}

TrainedModel train_impl(const DatasetBundle& bundle, const TrainConfig& config,
                        const ModelParams* warm_start, LossLog* log) {
  validate_config(config);
  if (auto violations = validate_bundle(bundle); !violations.empty())
    throw std::invalid_argument("train: invalid bundle: " + violations.front());

  const int d = bundle.feature_dim();
  const int a = bundle.prototype_dim();
  const int z_dim = config.z_dim > 0 ? config.z_dim : a;
  const Eigen::Index l = bundle.labeled_count();
  const Eigen::Index t = bundle.total_count();
  if (l < 1) throw std::invalid_argument("train: bundle has no labeled samples");
  const bool transductive = config.mode == TrainMode::kTransductive;
  if (transductive && t <= l)
    throw std::invalid_argument("train: transductive mode with no unlabeled samples");
  const auto& unseen_ids = bundle.split().unseen_classes;
  if (transductive && unseen_ids.empty())
    throw std::invalid_argument("train: transductive mode requires unseen prototypes");

  RandomStream init_rng(derive_stream_seed(config.seed, "init"));
  RandomStream data_rng(derive_stream_seed(config.seed, "data"));
  RandomStream noise_rng(derive_stream_seed(config.seed, "noise"));
  RandomStream mix_rng(derive_stream_seed(config.seed, "mixer"));

  std::vector<int> pool_ids = pool_classes(config.pool, bundle);
  const bool regularize = config.use_regularizer && config.ambiguity_weight > 0.0;
  if (regularize && pool_ids.size() < 2)
    throw std::invalid_argument("train: pool with < 2 classes (" +
                                to_string(config.pool) + ")");

  TrainedModel out;
  out.config = config;
  out.params = init_model(d, a, z_dim, config.hidden_dim,
                          std::max<int>(1, static_cast<int>(pool_ids.size())), init_rng);
  if (warm_start) {
    const auto& g = warm_start->generator.spec;
    const auto& e = warm_start->encoder.spec;
    if (warm_start->z_dim != z_dim || g.in_dim != z_dim + a || g.out_dim != d ||
        g.hidden_dim != config.hidden_dim || e.in_dim != d ||
        e.hidden_dim != config.hidden_dim || e.out_dim != 2 * z_dim)
      throw std::invalid_argument(
          "regularize_pretrained: pretrained dimensions do not match bundle/config");
    out.params.generator = warm_start->generator;
    out.params.encoder = warm_start->encoder;
  }

  Mlp decoder;
  const bool use_decoder = config.semantic_decoder_weight > 0.0;
  if (use_decoder) {
    decoder.spec = {d, config.hidden_dim, a, 0.2, OutputActivation::kNone};
    decoder.params = init_mlp(decoder.spec, init_rng);
  }

  MLPSpec gen_logits_spec = out.params.generator.spec;
  gen_logits_spec.output_activation = OutputActivation::kNone;

  auto draw_seen_batch = [&](int rows) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(rows));
    std::vector<int> ys(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      idx[static_cast<size_t>(r)] = data_rng.uniform_int(static_cast<int>(l));
      ys[static_cast<size_t>(r)] = bundle.train_label(idx[static_cast<size_t>(r)]);
    }
    return std::pair{bundle.features_batch(idx), bundle.prototype_matrix(ys)};
  };
  auto draw_unlabeled_batch = [&](int rows) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r)
      idx[static_cast<size_t>(r)] = l + data_rng.uniform_int(static_cast<int>(t - l));
    return bundle.features_batch(idx);
  };
  auto draw_unseen_prototypes = [&](int rows) {
    std::vector<int> ys(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r)
      ys[static_cast<size_t>(r)] =
          unseen_ids[static_cast<size_t>(data_rng.uniform_int(static_cast<int>(unseen_ids.size())))];
    return bundle.prototype_matrix(ys);
  };
  auto interpolate_rows = [&](const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake) {
    Eigen::MatrixXd out_m(real.rows(), real.cols());
    for (Eigen::Index r = 0; r < real.rows(); ++r) {
      const double alpha = noise_rng.uniform();
      out_m.row(r) = alpha * real.row(r) + (1.0 - alpha) * fake.row(r);
    }
    return out_m;
  };

  const int n = config.batch_size;
  const int steps_per_epoch = std::max<int>(1, static_cast<int>(l) / n);
  MlpAdam enc_opt, gen_opt, d1_opt, d2_opt, f_opt, dec_opt;
  const auto started = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int ic = 0; ic < config.n_critic; ++ic) {
        auto [x_s, c_s] = draw_seen_batch(n);
        Eigen::MatrixXd z = draw_normal(noise_rng, n, z_dim);
        Eigen::MatrixXd fake =
            mlp_eval(out.params.generator.spec, out.params.generator.params, hcat(z, c_s));
        critic_update(out.params.disc_cond, d1_opt, hcat(x_s, c_s), hcat(fake, c_s),
                      hcat(interpolate_rows(x_s, fake), c_s), config);

        if (transductive) {
          Eigen::MatrixXd x_u = draw_unlabeled_batch(n);
          Eigen::MatrixXd c_u = draw_unseen_prototypes(n);
          Eigen::MatrixXd z_u = draw_normal(noise_rng, n, z_dim);
          Eigen::MatrixXd fake_u = mlp_eval(out.params.generator.spec,
                                            out.params.generator.params, hcat(z_u, c_u));
          critic_update(out.params.disc_uncond, d2_opt, x_u, fake_u,
                        interpolate_rows(x_u, fake_u), config);
        }
        ++out.critic_updates;
      }

      auto [x_s, c_s] = draw_seen_batch(n);
      Eigen::MatrixXd c_u;
      if (transductive) c_u = draw_unseen_prototypes(n);
      Eigen::MatrixXd eps = draw_normal(noise_rng, n, z_dim);
      Eigen::MatrixXd z_prior_s = draw_normal(noise_rng, n, z_dim);
      Eigen::MatrixXd z_prior_u;
      if (transductive) z_prior_u = draw_normal(noise_rng, n, z_dim);

      AmbiguousBatch mix;
      Eigen::MatrixXd z_mix;
      if (regularize) {
        mix = make_ambiguous_batch(bundle, config.pool, config.lambda_policy, n, mix_rng);
        z_mix = draw_normal(mix_rng, n, z_dim);
      }

      Tape tape;
      MLPVars enc = config.freeze_encoder ? attach_frozen(tape, out.params.encoder.params)
                                          : attach(tape, out.params.encoder.params);
      MLPVars gen = attach(tape, out.params.generator.params);
      MLPVars f{};
      if (regularize) f = attach(tape, out.params.reg_classifier.params);
      MLPVars dec{};
      if (use_decoder) dec = attach(tape, decoder.params);
      MLPVars d1 = attach_frozen(tape, out.params.disc_cond.params);
      MLPVars d2{};
      if (transductive) d2 = attach_frozen(tape, out.params.disc_uncond.params);

      Var x_const = tape.constant(x_s);
      Var c_const = tape.constant(c_s);
      EncodeVars encoded = encode_tape(tape, out.params.encoder.spec, enc, x_const, eps);
      Var recon_logits =
          mlp_apply(tape, gen_logits_spec, gen, tape.concat_cols(encoded.z, c_const));
      Var l_bce_v = bce_from_logits_tape(tape, recon_logits, x_const);
      Var l_kl_v = kl_divergence_tape(tape, encoded.mu, encoded.log_var);

      Var fake_s = generate_tape(tape, out.params.generator.spec, gen,
                                 tape.constant(z_prior_s), c_const);
      Var l_wgan_s_v = tape.scale(
          tape.mean_all(mlp_apply(tape, out.params.disc_cond.spec, d1,
                                  tape.concat_cols(fake_s, c_const))),
          -1.0);

      Var l_wgan_u_v{};
      if (transductive) {
        Var fake_u = generate_tape(tape, out.params.generator.spec, gen,
                                   tape.constant(z_prior_u), tape.constant(c_u));
        l_wgan_u_v = tape.scale(
            tape.mean_all(mlp_apply(tape, out.params.disc_uncond.spec, d2, fake_u)), -1.0);
      }

      Var l_i_v{};
      if (regularize) {
        Var x_hat = generate_tape(tape, out.params.generator.spec, gen,
                                  tape.constant(z_mix), tape.constant(mix.prototypes));
        Var logits =
            classify_reg_tape(tape, out.params.reg_classifier.spec, f, x_hat);
        l_i_v = soft_cross_entropy_tape(tape, logits, tape.constant(mix.soft_labels));
      }

      Var total = tape.add(l_bce_v, tape.scale(l_kl_v, config.kl_weight));
      total = tape.add(total, tape.scale(l_wgan_s_v, config.gamma));
      if (transductive) total = tape.add(total, l_wgan_u_v);
      if (regularize) total = tape.add(total, tape.scale(l_i_v, config.ambiguity_weight));
      if (use_decoder) {
        Var recon = tape.sigmoid(recon_logits);
        Var c_pred = mlp_apply(tape, decoder.spec, dec, recon);
        Var diff = tape.sub(c_pred, c_const);
        total = tape.add(total, tape.scale(tape.mean_all(tape.mul(diff, diff)),
                                           config.semantic_decoder_weight));
      }

      std::vector<Var> wrt;
      if (!config.freeze_encoder) push_vars(wrt, enc);
      push_vars(wrt, gen);
      if (regularize) push_vars(wrt, f);
      if (use_decoder) push_vars(wrt, dec);
      auto grads = tape.gradient(total, wrt);

      size_t at = 0;
      if (!config.freeze_encoder) {
        step_mlp(out.params.encoder.params, tape, grads, at, enc_opt, config);
        at += 4;
      }
      step_mlp(out.params.generator.params, tape, grads, at, gen_opt, config);
      at += 4;
      if (regularize) {
        step_mlp(out.params.reg_classifier.params, tape, grads, at, f_opt, config);
        at += 4;
      }
      if (use_decoder) {
        step_mlp(decoder.params, tape, grads, at, dec_opt, config);
        at += 4;
      }

      LossReport report;
      report.l_bce = tape.scalar_value(l_bce_v);
      report.l_kl = config.kl_weight * tape.scalar_value(l_kl_v);
      report.l_wgan_s = tape.scalar_value(l_wgan_s_v);
      report.l_wgan_u = transductive ? tape.scalar_value(l_wgan_u_v) : 0.0;
      report.l_i = regularize ? config.ambiguity_weight * tape.scalar_value(l_i_v) : 0.0;
      report.total = total_loss(report, config.gamma);
      ++out.generator_updates;
      out.loss_log.push_back(report);
      if (log) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        log->append(out.generator_updates, report, elapsed);
      }
    }
    log_debug("epoch " + std::to_string(epoch + 1) + "/" +
              std::to_string(config.epochs) + " done, total " +
              std::to_string(out.loss_log.empty() ? 0.0 : out.loss_log.back().total));
  }
  return out;
}

}  // namespace

std::string to_string(TrainMode mode) {
  return mode == TrainMode::kInductive ? "inductive" : "transductive";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "inductive") return TrainMode::kInductive;
  if (text == "transductive") return TrainMode::kTransductive;
  throw std::invalid_argument("mode: unknown value '" + text +
                              "', expected inductive or transductive");
}

void validate_config(const TrainConfig& config) {
  if (config.n_critic < 1) throw std::invalid_argument("config: n_critic must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (config.adam_betas.first < 0.0 || config.adam_betas.first >= 1.0 ||
      config.adam_betas.second < 0.0 || config.adam_betas.second >= 1.0)
    throw std::invalid_argument("config: adam betas must lie in [0, 1)");
  if (config.gamma < 0.0 || config.lambda_wgan < 0.0)
    throw std::invalid_argument("config: loss weights must be >= 0");
  if (config.epochs < 0 || config.batch_size < 1 || config.z_dim < 0 ||
      config.hidden_dim < 1 || config.synth_per_unseen < 0 || config.synth_per_seen < 0 ||
      config.clf_epochs < 0)
    throw std::invalid_argument("config: counts must be non-negative (batch_size >= 1)");
  if (config.ambiguity_weight < 0.0 || config.kl_weight < 0.0 ||
      config.semantic_decoder_weight < 0.0)
    throw std::invalid_argument("config: loss weights must be >= 0");
  validate_policy(config.lambda_policy);
}

std::string config_to_json(const TrainConfig& c) {
  json doc;
  doc["mode"] = to_string(c.mode);
  doc["gamma"] = c.gamma;
  doc["lambda_wgan"] = c.lambda_wgan;
  doc["n_critic"] = c.n_critic;
  doc["lr"] = c.lr;
  doc["adam_betas"] = {c.adam_betas.first, c.adam_betas.second};
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["z_dim"] = c.z_dim;
  doc["lambda_policy"] = to_string(c.lambda_policy);
  doc["allow_lambda_extrapolation"] = c.lambda_policy.allow_extrapolation;
  doc["pool"] = to_string(c.pool);
  doc["ambiguity_weight"] = c.ambiguity_weight;
  doc["kl_weight"] = c.kl_weight;
  doc["synth_per_unseen"] = c.synth_per_unseen;
  doc["synth_per_seen"] = c.synth_per_seen;
  doc["clf_epochs"] = c.clf_epochs;
  doc["seed"] = c.seed;
  doc["hidden_dim"] = c.hidden_dim;
  doc["use_regularizer"] = c.use_regularizer;
  doc["freeze_encoder"] = c.freeze_encoder;
  doc["semantic_decoder_weight"] = c.semantic_decoder_weight;
  return doc.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error("config parse error: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw std::runtime_error("config: top level must be an object");

  TrainConfig c;
  bool extrapolate = false;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "mode")
        c.mode = parse_train_mode(value.get<std::string>());
      else if (key == "gamma")
        c.gamma = value.get<double>();
      else if (key == "lambda_wgan")
        c.lambda_wgan = value.get<double>();
      else if (key == "n_critic")
        c.n_critic = value.get<int>();
      else if (key == "lr")
        c.lr = value.get<double>();
      else if (key == "adam_betas") {
        if (!value.is_array() || value.size() != 2)
          throw std::runtime_error("config: adam_betas must be a pair");
        c.adam_betas = {value[0].get<double>(), value[1].get<double>()};
      } else if (key == "epochs")
        c.epochs = value.get<int>();
      else if (key == "batch_size")
        c.batch_size = value.get<int>();
      else if (key == "z_dim")
        c.z_dim = value.get<int>();
      else if (key == "lambda_policy")
        c.lambda_policy = parse_lambda_policy(value.get<std::string>());
      else if (key == "allow_lambda_extrapolation")
        extrapolate = value.get<bool>();
      else if (key == "pool")
        c.pool = parse_pool(value.get<std::string>());
      else if (key == "ambiguity_weight")
        c.ambiguity_weight = value.get<double>();
      else if (key == "kl_weight")
        c.kl_weight = value.get<double>();
      else if (key == "synth_per_unseen")
        c.synth_per_unseen = value.get<int>();
      else if (key == "synth_per_seen")
        c.synth_per_seen = value.get<int>();
      else if (key == "clf_epochs")
        c.clf_epochs = value.get<int>();
      else if (key == "seed")
        c.seed = value.get<uint64_t>();
      else if (key == "hidden_dim")
        c.hidden_dim = value.get<int>();
      else if (key == "use_regularizer")
        c.use_regularizer = value.get<bool>();
      else if (key == "freeze_encoder")
        c.freeze_encoder = value.get<bool>();
      else if (key == "semantic_decoder_weight")
        c.semantic_decoder_weight = value.get<double>();
      else
        throw std::runtime_error("config: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("config: " + std::string(e.what()));
  }
  c.lambda_policy.allow_extrapolation = extrapolate;
  validate_config(c);
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config(const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << config_to_json(config) << '\n';
}

void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  if (state.m.size() == 0) {
    state.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    state.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  state.t += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v.array().matrix() + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  param.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

TrainedModel train(const DatasetBundle& bundle, const TrainConfig& config, LossLog* log) {
  return train_impl(bundle, config, nullptr, log);
}

TrainedModel regularize_pretrained(const ModelParams& pretrained,
                                   const DatasetBundle& bundle, const TrainConfig& config,
                                   LossLog* log) {
  return train_impl(bundle, config, &pretrained, log);
}

LabeledFeatures synthesize_features(const TrainedModel& model, const DatasetBundle& bundle,
                                    const std::vector<int>& class_ids, int n_per_class,
                                    uint64_t seed) {
  if (n_per_class < 0)
    throw std::invalid_argument("synthesize_features: n_per_class must be >= 0");
  const int z_dim = model.params.z_dim;
  const int a = model.params.prototype_dim();
  const int d = model.params.feature_dim();
  if (bundle.prototype_dim() != a)
    throw std::invalid_argument("synthesize_features: prototype dimension mismatch");

  RandomStream rng(seed);
  LabeledFeatures out;
  out.features.resize(static_cast<Eigen::Index>(class_ids.size()) * n_per_class, d);
  out.labels.reserve(class_ids.size() * static_cast<size_t>(n_per_class));
  Eigen::Index row = 0;
  for (int y : class_ids) {
    const Eigen::VectorXd proto = bundle.prototype(y).vector.cast<double>();
    if (n_per_class == 0) continue;
    Eigen::MatrixXd in(n_per_class, z_dim + a);
    for (int r = 0; r < n_per_class; ++r) {
      for (int k = 0; k < z_dim; ++k) in(r, k) = rng.normal();
      in.row(r).tail(a) = proto.transpose();
    }
    out.features.middleRows(row, n_per_class) =
        mlp_eval(model.params.generator.spec, model.params.generator.params, in);
    for (int r = 0; r < n_per_class; ++r) out.labels.push_back(y);
    row += n_per_class;
  }
  return out;
}

LinearClassifier fit_final_classifier(const LabeledFeatures& data,
                                      const std::vector<int>& target_classes,
                                      int clf_epochs, double lr, uint64_t seed) {
  const Eigen::Index total = data.features.rows();
  if (total == 0) throw std::invalid_argument("fit_final_classifier: empty training set");
  if (static_cast<Eigen::Index>(data.labels.size()) != total)
    throw std::invalid_argument("fit_final_classifier: label count mismatch");
  if (clf_epochs < 0 || !(lr > 0.0))
    throw std::invalid_argument("fit_final_classifier: bad epochs or learning rate");

  LinearClassifier clf =
      make_linear_classifier(static_cast<int>(data.features.cols()), target_classes);
  const int k = static_cast<int>(clf.class_ids.size());
  std::unordered_map<int, int> column_of;
  for (int i = 0; i < k; ++i) column_of[clf.class_ids[static_cast<size_t>(i)]] = i;

  std::vector<int> label_col(static_cast<size_t>(total));
  std::vector<int> support(static_cast<size_t>(k), 0);
  for (Eigen::Index i = 0; i < total; ++i) {
    auto it = column_of.find(data.labels[static_cast<size_t>(i)]);
    if (it == column_of.end())
      throw std::invalid_argument("fit_final_classifier: label " +
                                  std::to_string(data.labels[static_cast<size_t>(i)]) +
                                  " is not a target class");
    label_col[static_cast<size_t>(i)] = it->second;
    ++support[static_cast<size_t>(it->second)];
  }
  for (int i = 0; i < k; ++i)
    if (support[static_cast<size_t>(i)] == 0)
      throw std::invalid_argument("fit_final_classifier: empty class " +
                                  std::to_string(clf.class_ids[static_cast<size_t>(i)]));

  const Eigen::Index d = data.features.cols();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, k);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, k);
  AdamState w_state, b_state;
  RandomStream rng(seed);
  const Eigen::Index batch = 64;

  for (int epoch = 0; epoch < clf_epochs; ++epoch) {
    std::vector<int> perm = rng.permutation(static_cast<int>(total));
    for (Eigen::Index at = 0; at < total; at += batch) {
      const Eigen::Index nb = std::min(batch, total - at);
      Eigen::MatrixXd xb(nb, d);
      std::vector<int> yb(static_cast<size_t>(nb));
      for (Eigen::Index r = 0; r < nb; ++r) {
        const int src = perm[static_cast<size_t>(at + r)];
        xb.row(r) = data.features.row(src);
        yb[static_cast<size_t>(r)] = label_col[static_cast<size_t>(src)];
      }
      Eigen::MatrixXd logits = (xb * w).rowwise() + b.row(0);
      Eigen::MatrixXd delta(nb, k);
      for (Eigen::Index r = 0; r < nb; ++r) {
        const double m = logits.row(r).maxCoeff();
        Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
        delta.row(r) = (e / e.sum()).matrix();
        delta(r, yb[static_cast<size_t>(r)]) -= 1.0;
      }
      delta /= static_cast<double>(nb);
      Eigen::MatrixXd gw = xb.transpose() * delta;
      Eigen::MatrixXd gb = delta.colwise().sum();
      adam_step(w, gw, w_state, lr, 0.5, 0.999);
      adam_step(b, gb, b_state, lr, 0.5, 0.999);
    }
  }
  clf.weight = std::move(w);
  clf.bias = b.row(0).transpose();
  return clf;
}

}  // namespace ambigzsl
