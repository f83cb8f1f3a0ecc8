#pragma once

#include <Eigen/Core>

#include <vector>

namespace ambigzsl {

class Tape;

// Handle to a tape node. Cheap to copy; valid only for the tape that
// created it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape over Eigen double matrices. Scalars are 1x1 matrices.
//
// Backward rules are themselves expressed as tape operations, so the
// result of gradient() can be differentiated again. The WGAN gradient
// penalty relies on that second-order path.
class Tape {
 public:
  Var constant(Eigen::MatrixXd value);
  Var leaf(Eigen::MatrixXd value);  // differentiation endpoint
  Var scalar(double v) { return constant(Eigen::MatrixXd::Constant(1, 1, v)); }

  const Eigen::MatrixXd& value(Var v) const;
  double scalar_value(Var v) const;
  bool requires_grad(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
  Var leaky_relu(Var a, double negative_slope);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var clamp(Var a, double lo, double hi);
  Var sum_all(Var a);   // 1x1
  Var mean_all(Var a);  // 1x1
  Var row_sum(Var a);   // n x 1
  Var col_sum(Var a);   // 1 x m
  Var broadcast_all(Var a, Eigen::Index rows, Eigen::Index cols);
  Var broadcast_row(Var a, Eigen::Index rows);  // 1 x m -> rows x m
  Var broadcast_col(Var a, Eigen::Index cols);  // n x 1 -> n x cols
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
  // Places a into columns [start, start + a.cols()) of an otherwise zero
  // matrix with total_cols columns.
  Var pad_cols(Var a, Eigen::Index start, Eigen::Index total_cols);

  // Adjoints of a 1x1 output w.r.t. each var in wrt, appended to the tape
  // as fresh nodes. Vars the output does not depend on get zero matrices.
  std::vector<Var> gradient(Var output, const std::vector<Var>& wrt);

 private:
  enum class Op {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScale,
    kAddScalar,
    kMatmul,
    kLeakyRelu,
    kSigmoid,
    kSoftplus,
    kExp,
    kLog,
    kSqrt,
    kClamp,
    kSumAll,
    kRowSum,
    kColSum,
    kBroadcastAll,
    kBroadcastRow,
    kBroadcastCol,
    kConcatCols,
    kSliceCols,
    kPadCols,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double p0 = 0.0;
    double p1 = 0.0;
    Eigen::Index i0 = 0;
    Eigen::Index i1 = 0;
    bool flag_a = false;
    bool flag_b = false;
    bool requires_grad = false;
    Eigen::MatrixXd value;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check(Var v, const char* where) const;
  void backward_into(int id, Var adjoint, std::vector<Var>& adj);

  std::vector<Node> nodes_;
};

}  // namespace ambigzsl
