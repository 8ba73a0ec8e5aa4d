#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rstcoref {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace ad {

using Matrix = Eigen::MatrixXd;

/// Trainable tensor. `grad` accumulates across backward passes until zeroed.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Reverse-mode recording of matrix operations.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& upstream)>;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  /// Records a node. `backward` receives d(root)/d(this node) and pushes
  /// contributions into inputs through accumulate().
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root, runs every backward closure
  /// in reverse order and adds leaf gradients into their Parameters.
  void backward(Var root);

  void accumulate(Var v, const Matrix& g);
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.index())].requires_grad; }
  const Matrix& value(int index) const { return nodes_[static_cast<std::size_t>(index)].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(index_); }

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (n x m) plus a 1 x m row broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
/// Elementwise product with a constant matrix (dropout masks).
Var mul_const(Var a, const Matrix& mask);
Var hadamard(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var transpose(Var a);
Var sum(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, const std::vector<int>& rows);
/// P x 1 column of a(r, c) for each (r, c).
Var gather_elements(Var a, const std::vector<std::pair<int, int>>& positions);

/// Inclusive token range for span_attention.
struct SpanRange {
  int start;
  int end;
};

/// Row s of the result is [x_start ; x_end ; sum_t alpha_t x_t], alpha being
/// the softmax of logits over the span. x is n x d, logits n x 1.
Var span_attention(Var x, Var logits, const std::vector<SpanRange>& spans);

/// Negative marginal log-likelihood over antecedent sets with a fixed zero
/// dummy score. Mention m owns rows offsets[m]..offsets[m+1]-1 of `scores`
/// (P x 1); `gold` flags those rows. A mention with no gold row takes the
/// dummy as gold.
Var marginal_nll(Var scores, const std::vector<int>& offsets, const std::vector<char>& gold);

/// Summed binary cross-entropy of sigmoid(logits) against 0/1 targets; 1x1.
Var logistic_loss(Var logits, const std::vector<char>& targets);

void check_finite(const Matrix& m, const std::string& what);

}  // namespace ad
}  // namespace rstcoref
