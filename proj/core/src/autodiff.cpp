#include "ambigzsl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ambigzsl {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v, const char* where) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument(std::string(where) + ": var does not belong to this tape");
}

const Tape::Node& Tape::node(Var v) const {
  check(v, "node");
  return nodes_[static_cast<size_t>(v.id)];
}

const Eigen::MatrixXd& Tape::value(Var v) const {
  // Reference is invalidated by the next tape operation; copy to keep.
  return node(v).value;
}

double Tape::scalar_value(Var v) const {
  const auto& m = node(v).value;
  if (m.rows() != 1 || m.cols() != 1)
    throw std::invalid_argument("scalar_value: var is not 1x1");
  return m(0, 0);
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::constant(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  n.value = va + vb;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  n.value = va - vb;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  n.value = va.cwiseProduct(vb);
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  check(a, "div");
  check(b, "div");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw std::invalid_argument("div: shape mismatch");
  Node n;
  n.op = Op::kDiv;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  n.value = va.cwiseQuotient(vb);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  check(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.p0 = s;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value * s;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  check(a, "add_scalar");
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.p0 = s;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.array() + s;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  check(a, "matmul");
  check(b, "matmul");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  const Eigen::Index inner_a = transpose_a ? va.rows() : va.cols();
  const Eigen::Index inner_b = transpose_b ? vb.cols() : vb.rows();
  if (inner_a != inner_b) throw std::invalid_argument("matmul: inner dimension mismatch");
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.flag_a = transpose_a;
  n.flag_b = transpose_b;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  if (!transpose_a && !transpose_b)
    n.value = va * vb;
  else if (transpose_a && !transpose_b)
    n.value = va.transpose() * vb;
  else if (!transpose_a && transpose_b)
    n.value = va * vb.transpose();
  else
    n.value = va.transpose() * vb.transpose();
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double negative_slope) {
  check(a, "leaky_relu");
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = a.id;
  n.p0 = negative_slope;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.unaryExpr(
      [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; });
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check(a, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.unaryExpr(&stable_sigmoid);
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  check(a, "softplus");
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.unaryExpr(&stable_softplus);
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check(a, "exp");
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.array().exp();
  return push(std::move(n));
}

Var Tape::log(Var a) {
  check(a, "log");
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.array().log();
  return push(std::move(n));
}

Var Tape::sqrt(Var a) {
  check(a, "sqrt");
  Node n;
  n.op = Op::kSqrt;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.array().sqrt();
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  check(a, "clamp");
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  Node n;
  n.op = Op::kClamp;
  n.a = a.id;
  n.p0 = lo;
  n.p1 = hi;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.unaryExpr(
      [lo, hi](double x) { return std::min(std::max(x, lo), hi); });
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  check(a, "sum_all");
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = Eigen::MatrixXd::Constant(1, 1, nodes_[static_cast<size_t>(a.id)].value.sum());
  return push(std::move(n));
}

Var Tape::mean_all(Var a) {
  check(a, "mean_all");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (va.size() == 0) throw std::invalid_argument("mean_all: empty matrix");
  return scale(sum_all(a), 1.0 / static_cast<double>(va.size()));
}

Var Tape::row_sum(Var a) {
  check(a, "row_sum");
  Node n;
  n.op = Op::kRowSum;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.rowwise().sum();
  return push(std::move(n));
}

Var Tape::col_sum(Var a) {
  check(a, "col_sum");
  Node n;
  n.op = Op::kColSum;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = nodes_[static_cast<size_t>(a.id)].value.colwise().sum();
  return push(std::move(n));
}

Var Tape::broadcast_all(Var a, Eigen::Index rows, Eigen::Index cols) {
  check(a, "broadcast_all");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (va.rows() != 1 || va.cols() != 1)
    throw std::invalid_argument("broadcast_all: input must be 1x1");
  Node n;
  n.op = Op::kBroadcastAll;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = Eigen::MatrixXd::Constant(rows, cols, va(0, 0));
  return push(std::move(n));
}

Var Tape::broadcast_row(Var a, Eigen::Index rows) {
  check(a, "broadcast_row");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (va.rows() != 1) throw std::invalid_argument("broadcast_row: input must have 1 row");
  Node n;
  n.op = Op::kBroadcastRow;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = va.replicate(rows, 1);
  return push(std::move(n));
}

Var Tape::broadcast_col(Var a, Eigen::Index cols) {
  check(a, "broadcast_col");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (va.cols() != 1)
    throw std::invalid_argument("broadcast_col: input must have 1 column");
  Node n;
  n.op = Op::kBroadcastCol;
  n.a = a.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = va.replicate(1, cols);
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  check(a, "concat_cols");
  check(b, "concat_cols");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  const auto& vb = nodes_[static_cast<size_t>(b.id)].value;
  if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad ||
                    nodes_[static_cast<size_t>(b.id)].requires_grad;
  n.value.resize(va.rows(), va.cols() + vb.cols());
  n.value << va, vb;
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  check(a, "slice_cols");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (start < 0 || len < 0 || start + len > va.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = start;
  n.i1 = len;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = va.middleCols(start, len);
  return push(std::move(n));
}

Var Tape::pad_cols(Var a, Eigen::Index start, Eigen::Index total_cols) {
  check(a, "pad_cols");
  const auto& va = nodes_[static_cast<size_t>(a.id)].value;
  if (start < 0 || start + va.cols() > total_cols)
    throw std::invalid_argument("pad_cols: range out of bounds");
  Node n;
  n.op = Op::kPadCols;
  n.a = a.id;
  n.i0 = start;
  n.i1 = total_cols;
  n.requires_grad = nodes_[static_cast<size_t>(a.id)].requires_grad;
  n.value = Eigen::MatrixXd::Zero(va.rows(), total_cols);
  n.value.middleCols(start, va.cols()) = va;
  return push(std::move(n));
}

void Tape::backward_into(int id, Var adjoint, std::vector<Var>& adj) {
  // Copy: ops below may reallocate nodes_.
  const Node n = nodes_[static_cast<size_t>(id)];
  Var self{this, id};
  Var g = adjoint;

  auto accumulate = [&](int input, Var contrib) {
    if (input < 0) return;
    if (!nodes_[static_cast<size_t>(input)].requires_grad) return;
    auto& slot = adj[static_cast<size_t>(input)];
    slot = slot.valid() ? add(slot, contrib) : contrib;
  };
  Var a{this, n.a};
  Var b{this, n.b};

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;
    case Op::kAdd:
      accumulate(n.a, g);
      accumulate(n.b, g);
      break;
    case Op::kSub:
      accumulate(n.a, g);
      accumulate(n.b, scale(g, -1.0));
      break;
    case Op::kMul:
      accumulate(n.a, mul(g, b));
      accumulate(n.b, mul(g, a));
      break;
    case Op::kDiv:
      accumulate(n.a, div(g, b));
      accumulate(n.b, scale(div(mul(g, self), b), -1.0));
      break;
    case Op::kScale:
      accumulate(n.a, scale(g, n.p0));
      break;
    case Op::kAddScalar:
      accumulate(n.a, g);
      break;
    case Op::kMatmul:
      if (!n.flag_a && !n.flag_b) {
        accumulate(n.a, matmul(g, b, false, true));
        accumulate(n.b, matmul(a, g, true, false));
      } else if (n.flag_a && !n.flag_b) {
        accumulate(n.a, matmul(b, g, false, true));
        accumulate(n.b, matmul(a, g, false, false));
      } else if (!n.flag_a && n.flag_b) {
        accumulate(n.a, matmul(g, b, false, false));
        accumulate(n.b, matmul(g, a, true, false));
      } else {
        accumulate(n.a, matmul(b, g, true, true));
        accumulate(n.b, matmul(g, a, true, true));
      }
      break;
    case Op::kLeakyRelu: {
      const double slope = n.p0;
      Eigen::MatrixXd mask = nodes_[static_cast<size_t>(n.a)].value.unaryExpr(
          [slope](double x) { return x > 0.0 ? 1.0 : slope; });
      accumulate(n.a, mul(g, constant(std::move(mask))));
      break;
    }
    case Op::kSigmoid: {
      Var one_minus = add_scalar(scale(self, -1.0), 1.0);
      accumulate(n.a, mul(g, mul(self, one_minus)));
      break;
    }
    case Op::kSoftplus:
      accumulate(n.a, mul(g, sigmoid(a)));
      break;
    case Op::kExp:
      accumulate(n.a, mul(g, self));
      break;
    case Op::kLog:
      accumulate(n.a, div(g, a));
      break;
    case Op::kSqrt:
      accumulate(n.a, scale(div(g, self), 0.5));
      break;
    case Op::kClamp: {
      const double lo = n.p0;
      const double hi = n.p1;
      Eigen::MatrixXd mask = nodes_[static_cast<size_t>(n.a)].value.unaryExpr(
          [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
      accumulate(n.a, mul(g, constant(std::move(mask))));
      break;
    }
    case Op::kSumAll: {
      const auto& va = nodes_[static_cast<size_t>(n.a)].value;
      accumulate(n.a, broadcast_all(g, va.rows(), va.cols()));
      break;
    }
    case Op::kRowSum:
      accumulate(n.a, broadcast_col(g, nodes_[static_cast<size_t>(n.a)].value.cols()));
      break;
    case Op::kColSum:
      accumulate(n.a, broadcast_row(g, nodes_[static_cast<size_t>(n.a)].value.rows()));
      break;
    case Op::kBroadcastAll:
      accumulate(n.a, sum_all(g));
      break;
    case Op::kBroadcastRow:
      accumulate(n.a, col_sum(g));
      break;
    case Op::kBroadcastCol:
      accumulate(n.a, row_sum(g));
      break;
    case Op::kConcatCols: {
      const Eigen::Index a_cols = nodes_[static_cast<size_t>(n.a)].value.cols();
      const Eigen::Index b_cols = nodes_[static_cast<size_t>(n.b)].value.cols();
      accumulate(n.a, slice_cols(g, 0, a_cols));
      accumulate(n.b, slice_cols(g, a_cols, b_cols));
      break;
    }
    case Op::kSliceCols:
      accumulate(n.a, pad_cols(g, n.i0, nodes_[static_cast<size_t>(n.a)].value.cols()));
      break;
    case Op::kPadCols:
      accumulate(n.a, slice_cols(g, n.i0, nodes_[static_cast<size_t>(n.a)].value.cols()));
      break;
  }
}

std::vector<Var> Tape::gradient(Var output, const std::vector<Var>& wrt) {
  check(output, "gradient");
  {
    const auto& vo = nodes_[static_cast<size_t>(output.id)].value;
    if (vo.rows() != 1 || vo.cols() != 1)
      throw std::invalid_argument("gradient: output must be 1x1");
  }
  for (Var v : wrt) check(v, "gradient");

  // Adjoint slots for nodes present before this call; nodes the backward
  // pass appends are never revisited, which keeps the walk linear.
  std::vector<Var> adj(static_cast<size_t>(output.id) + 1);
  adj[static_cast<size_t>(output.id)] = constant(Eigen::MatrixXd::Ones(1, 1));
  for (int id = output.id; id >= 0; --id) {
    if (!adj[static_cast<size_t>(id)].valid()) continue;
    if (!nodes_[static_cast<size_t>(id)].requires_grad) continue;
    backward_into(id, adj[static_cast<size_t>(id)], adj);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var v : wrt) {
    if (static_cast<size_t>(v.id) < adj.size() && adj[static_cast<size_t>(v.id)].valid()) {
      out.push_back(adj[static_cast<size_t>(v.id)]);
    } else {
      const auto& vv = nodes_[static_cast<size_t>(v.id)].value;
      out.push_back(constant(Eigen::MatrixXd::Zero(vv.rows(), vv.cols())));
    }
  }
  return out;
}

}  // namespace ambigzsl
