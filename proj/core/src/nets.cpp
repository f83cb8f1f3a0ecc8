#include "ambigzsl/nets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ambigzsl {
namespace {

using nlohmann::json;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_vector_dim(const Eigen::VectorXd& v, int dim, const char* what) {
  if (static_cast<int>(v.size()) != dim)
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(dim) + ", got " + std::to_string(v.size()));
}

json tensor_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd tensor_from_json(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw std::runtime_error("checkpoint: missing tensor " + key);
  const json& t = doc.at(key);
  const auto rows = t.at("rows").get<Eigen::Index>();
  const auto cols = t.at("cols").get<Eigen::Index>();
  const auto& data = t.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("checkpoint: tensor " + key + " has " +
                             std::to_string(data.size()) + " values for shape " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<size_t>(i++)];
  return m;
}

void write_mlp_tensors(json& tensors, const std::string& component, const MLPParams& p) {
  tensors[component + ".layer1.weight"] = tensor_to_json(p.w1);
  tensors[component + ".layer1.bias"] = tensor_to_json(p.b1);
  tensors[component + ".layer2.weight"] = tensor_to_json(p.w2);
  tensors[component + ".layer2.bias"] = tensor_to_json(p.b2);
}

Mlp read_mlp_tensors(const json& tensors, const std::string& component,
                     OutputActivation activation, double slope) {
  Mlp net;
  net.params.w1 = tensor_from_json(tensors, component + ".layer1.weight");
  net.params.b1 = tensor_from_json(tensors, component + ".layer1.bias");
  net.params.w2 = tensor_from_json(tensors, component + ".layer2.weight");
  net.params.b2 = tensor_from_json(tensors, component + ".layer2.bias");
  net.spec.in_dim = static_cast<int>(net.params.w1.rows());
  net.spec.hidden_dim = static_cast<int>(net.params.w1.cols());
  net.spec.out_dim = static_cast<int>(net.params.w2.cols());
  net.spec.hidden_slope = slope;
  net.spec.output_activation = activation;
  validate_spec(net.spec);
  if (net.params.b1.rows() != 1 || net.params.b1.cols() != net.spec.hidden_dim ||
      net.params.w2.rows() != net.spec.hidden_dim || net.params.b2.rows() != 1 ||
      net.params.b2.cols() != net.spec.out_dim)
    throw std::runtime_error("checkpoint: inconsistent shapes for " + component);
  return net;
}

}  // namespace

void validate_spec(const MLPSpec& spec) {
  if (spec.in_dim < 1 || spec.hidden_dim < 1 || spec.out_dim < 1)
    throw std::invalid_argument("MLPSpec: all dimensions must be >= 1");
}

int param_count(const MLPSpec& spec) {
  return spec.in_dim * spec.hidden_dim + spec.hidden_dim +
         spec.hidden_dim * spec.out_dim + spec.out_dim;
}

MLPParams init_mlp(const MLPSpec& spec, RandomStream& rng, double weight_stddev) {
  validate_spec(spec);
  MLPParams p;
  p.w1.resize(spec.in_dim, spec.hidden_dim);
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = rng.normal(0.0, weight_stddev);
  p.b1 = Eigen::MatrixXd::Zero(1, spec.hidden_dim);
  p.w2.resize(spec.hidden_dim, spec.out_dim);
  for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(r, c) = rng.normal(0.0, weight_stddev);
  p.b2 = Eigen::MatrixXd::Zero(1, spec.out_dim);
  return p;
}

MLPVars attach(Tape& tape, const MLPParams& params) {
  return MLPVars{tape.leaf(params.w1), tape.leaf(params.b1), tape.leaf(params.w2),
                 tape.leaf(params.b2)};
}

MLPVars attach_frozen(Tape& tape, const MLPParams& params) {
  return MLPVars{tape.constant(params.w1), tape.constant(params.b1),
                 tape.constant(params.w2), tape.constant(params.b2)};
}

Var mlp_apply(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x) {
  if (tape.value(x).cols() != spec.in_dim)
    throw std::invalid_argument("mlp_apply: input has " +
                                std::to_string(tape.value(x).cols()) +
                                " columns, spec expects " + std::to_string(spec.in_dim));
  const Eigen::Index n = tape.value(x).rows();
  Var h = tape.leaky_relu(
      tape.add(tape.matmul(x, vars.w1), tape.broadcast_row(vars.b1, n)),
      spec.hidden_slope);
  Var y = tape.add(tape.matmul(h, vars.w2), tape.broadcast_row(vars.b2, n));
  if (spec.output_activation == OutputActivation::kSigmoid) y = tape.sigmoid(y);
  return y;
}

Eigen::MatrixXd mlp_eval(const MLPSpec& spec, const MLPParams& params,
                         const Eigen::MatrixXd& x) {
  if (x.cols() != spec.in_dim)
    throw std::invalid_argument("mlp_eval: input has " + std::to_string(x.cols()) +
                                " columns, spec expects " + std::to_string(spec.in_dim));
  const double slope = spec.hidden_slope;
  Eigen::MatrixXd h = ((x * params.w1).rowwise() + params.b1.row(0))
                          .unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  Eigen::MatrixXd y = (h * params.w2).rowwise() + params.b2.row(0);
  if (spec.output_activation == OutputActivation::kSigmoid)
    y = y.unaryExpr(&stable_sigmoid);
  return y;
}

ModelParams init_model(int feature_dim, int prototype_dim, int z_dim, int hidden_dim,
                       int pool_size, RandomStream& rng) {
  if (feature_dim < 1 || prototype_dim < 1 || z_dim < 1 || hidden_dim < 1 ||
      pool_size < 1)
    throw std::invalid_argument("init_model: all dimensions must be >= 1");
  ModelParams m;
  m.z_dim = z_dim;
  m.encoder.spec = {feature_dim, hidden_dim, 2 * z_dim, 0.2, OutputActivation::kNone};
  m.generator.spec = {z_dim + prototype_dim, hidden_dim, feature_dim, 0.2,
                      OutputActivation::kSigmoid};
  m.disc_cond.spec = {feature_dim + prototype_dim, hidden_dim, 1, 0.2,
                      OutputActivation::kNone};
  m.disc_uncond.spec = {feature_dim, hidden_dim, 1, 0.2, OutputActivation::kNone};
  m.reg_classifier.spec = {feature_dim, hidden_dim, pool_size, 0.2,
                           OutputActivation::kNone};
  m.encoder.params = init_mlp(m.encoder.spec, rng);
  m.generator.params = init_mlp(m.generator.spec, rng);
  m.disc_cond.params = init_mlp(m.disc_cond.spec, rng);
  m.disc_uncond.params = init_mlp(m.disc_uncond.spec, rng);
  m.reg_classifier.params = init_mlp(m.reg_classifier.spec, rng);
  return m;
}

EncodeResult encode(const ModelParams& params, const Eigen::VectorXd& x,
                    RandomStream& rng) {
  check_vector_dim(x, params.encoder.spec.in_dim, "encode");
  Eigen::MatrixXd out = mlp_eval(params.encoder.spec, params.encoder.params,
                                 x.transpose());
  EncodeResult r;
  r.mu = out.row(0).head(params.z_dim);
  r.log_var = out.row(0)
                  .tail(params.z_dim)
                  .unaryExpr([](double v) { return std::clamp(v, kLogVarMin, kLogVarMax); });
  r.z.resize(params.z_dim);
  for (int i = 0; i < params.z_dim; ++i)
    r.z(i) = r.mu(i) + std::exp(0.5 * r.log_var(i)) * rng.normal();
  return r;
}

Eigen::VectorXd generate(const ModelParams& params, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& c) {
  check_vector_dim(z, params.z_dim, "generate: z");
  check_vector_dim(c, params.prototype_dim(), "generate: c");
  Eigen::MatrixXd in(1, z.size() + c.size());
  in << z.transpose(), c.transpose();
  return mlp_eval(params.generator.spec, params.generator.params, in).row(0);
}

double discriminate(const ModelParams& params, const Eigen::VectorXd& x,
                    const std::optional<Eigen::VectorXd>& c) {
  check_vector_dim(x, params.feature_dim(), "discriminate: x");
  if (c.has_value()) {
    check_vector_dim(*c, params.prototype_dim(), "discriminate: c");
    Eigen::MatrixXd in(1, x.size() + c->size());
    in << x.transpose(), c->transpose();
    return mlp_eval(params.disc_cond.spec, params.disc_cond.params, in)(0, 0);
  }
  return mlp_eval(params.disc_uncond.spec, params.disc_uncond.params, x.transpose())(0, 0);
}

Eigen::VectorXd classify_reg(const ModelParams& params, const Eigen::VectorXd& x) {
  check_vector_dim(x, params.feature_dim(), "classify_reg");
  return mlp_eval(params.reg_classifier.spec, params.reg_classifier.params,
                  x.transpose())
      .row(0);
}

EncodeVars encode_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x,
                       const Eigen::MatrixXd& epsilon) {
  const int z_dim = spec.out_dim / 2;
  if (spec.out_dim != 2 * z_dim)
    throw std::invalid_argument("encode_tape: encoder out_dim must be even");
  Var out = mlp_apply(tape, spec, vars, x);
  if (epsilon.rows() != tape.value(x).rows() || epsilon.cols() != z_dim)
    throw std::invalid_argument("encode_tape: epsilon shape mismatch");
  EncodeVars r;
  r.mu = tape.slice_cols(out, 0, z_dim);
  r.log_var = tape.clamp(tape.slice_cols(out, z_dim, z_dim), kLogVarMin, kLogVarMax);
  Var sigma = tape.exp(tape.scale(r.log_var, 0.5));
  r.z = tape.add(r.mu, tape.mul(sigma, tape.constant(epsilon)));
  return r;
}

Var generate_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var z, Var c) {
  return mlp_apply(tape, spec, vars, tape.concat_cols(z, c));
}

Var discriminate_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var input) {
  return mlp_apply(tape, spec, vars, input);
}

Var classify_reg_tape(Tape& tape, const MLPSpec& spec, const MLPVars& vars, Var x) {
  return mlp_apply(tape, spec, vars, x);
}

LinearClassifier make_linear_classifier(int feature_dim, std::vector<int> class_ids) {
  if (feature_dim < 1 || class_ids.empty())
    throw std::invalid_argument("make_linear_classifier: empty classifier");
  std::sort(class_ids.begin(), class_ids.end());
  LinearClassifier clf;
  clf.weight = Eigen::MatrixXd::Zero(feature_dim, static_cast<Eigen::Index>(class_ids.size()));
  clf.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(class_ids.size()));
  clf.class_ids = std::move(class_ids);
  return clf;
}

Eigen::VectorXd classifier_scores(const LinearClassifier& clf, const Eigen::VectorXd& x) {
  check_vector_dim(x, static_cast<int>(clf.weight.rows()), "classifier_scores");
  return clf.weight.transpose() * x + clf.bias;
}

int predict(const LinearClassifier& clf, const Eigen::VectorXd& x) {
  Eigen::VectorXd s = classifier_scores(clf, x);
  int best_idx = 0;
  for (int i = 1; i < static_cast<int>(s.size()); ++i) {
    const bool better = s(i) > s(best_idx);
    const bool tie_lower = s(i) == s(best_idx) &&
                           clf.class_ids[static_cast<size_t>(i)] <
                               clf.class_ids[static_cast<size_t>(best_idx)];
    if (better || tie_lower) best_idx = i;
  }
  return clf.class_ids[static_cast<size_t>(best_idx)];
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& config_json) {
  json doc;
  doc["schema_version"] = kCheckpointSchemaVersion;
  doc["z_dim"] = params.z_dim;
  doc["hidden_slope"] = params.generator.spec.hidden_slope;
  if (config_json.empty()) {
    doc["config"] = json::object();
  } else {
    try {
      doc["config"] = json::parse(config_json);
    } catch (const json::exception& e) {
      throw std::invalid_argument("save_checkpoint: config is not valid JSON: " +
                                  std::string(e.what()));
    }
  }
  json tensors;
  write_mlp_tensors(tensors, "encoder", params.encoder.params);
  write_mlp_tensors(tensors, "generator", params.generator.params);
  write_mlp_tensors(tensors, "disc_cond", params.disc_cond.params);
  write_mlp_tensors(tensors, "disc_uncond", params.disc_uncond.params);
  write_mlp_tensors(tensors, "reg_classifier", params.reg_classifier.params);
  doc["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint parse error: " + std::string(e.what()));
  }
  LoadedCheckpoint loaded;
  loaded.schema_version = doc.value("schema_version", 0);
  if (loaded.schema_version != kCheckpointSchemaVersion)
    throw std::runtime_error("checkpoint: unsupported schema version " +
                             std::to_string(loaded.schema_version));
  if (!doc.contains("tensors")) throw std::runtime_error("checkpoint: missing tensors");
  const double slope = doc.value("hidden_slope", 0.2);
  const json& tensors = doc.at("tensors");

  ModelParams& m = loaded.params;
  m.z_dim = doc.at("z_dim").get<int>();
  m.encoder = read_mlp_tensors(tensors, "encoder", OutputActivation::kNone, slope);
  m.generator = read_mlp_tensors(tensors, "generator", OutputActivation::kSigmoid, slope);
  m.disc_cond = read_mlp_tensors(tensors, "disc_cond", OutputActivation::kNone, slope);
  m.disc_uncond =
      read_mlp_tensors(tensors, "disc_uncond", OutputActivation::kNone, slope);
  m.reg_classifier =
      read_mlp_tensors(tensors, "reg_classifier", OutputActivation::kNone, slope);
  if (m.encoder.spec.out_dim != 2 * m.z_dim)
    throw std::runtime_error("checkpoint: encoder output does not match z_dim");
  loaded.config_json = doc.value("config", json::object()).dump();
  return loaded;
}

}  // namespace ambigzsl
