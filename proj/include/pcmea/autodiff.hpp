#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pcmea/kg.hpp"
#include "pcmea/matrix.hpp"

namespace pcmea::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode recorder. Nodes are appended in evaluation order, so a single
/// backwards sweep over the node list is a valid topological traversal.
class Tape {
 public:
  /// Receives the node's own value and the gradient flowing into it.
  using Backward = std::function<void(Tape&, const Matrix& out_value, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Matrix value);
  /// Input whose gradient is accumulated by backward().
  Var variable(Matrix value);

  /// Records an op result. `backward` runs only if some parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  /// Gradient of the last backward() target w.r.t. `v` (zeros if unreached).
  Matrix grad(Var v) const;

  /// Seeds d(target)/d(target) = 1 for a 1x1 target and propagates.
  void backward(Var target);

  /// Adds `g` to the gradient buffer of `v` if it needs one.
  void accumulate(Var v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (n x d) + row vector b (1 x d) broadcast over rows.
Var add_row(Var a, Var b);
/// a * s where s is 1 x 1.
Var mul_scalar(Var a, Var s);

// Element-wise nonlinearities.
Var leaky_relu(Var a, double slope);
Var elu(Var a);
Var gelu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
/// log(exp(a) + exp(b)) element-wise, overflow-safe.
Var log_add_exp(Var a, Var b);

// Row-wise reductions and normalizations.
Var row_softmax(Var a);
/// Log-softmax along each row over the entries where mask is true; masked-out
/// entries produce 0 and receive no gradient. Every row needs one live entry.
Var row_log_softmax(Var a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask);
Var row_normalize(Var a, double eps = 1e-12);

// Whole-matrix reductions to 1 x 1.
Var sum(Var a);
Var mean(Var a);
/// log(mean(exp(a))) over all entries.
Var log_mean_exp(Var a);

// Shape manipulation.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const EntityIndex> rows);
/// Row-major reinterpretation; rows * cols must equal the input size.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Diagonal of a square matrix as an n x 1 column.
Var diagonal(Var a);
/// Entry (r, c) as 1 x 1.
Var entry(Var a, Eigen::Index r, Eigen::Index c);

/// One graph-attention aggregation. `adj` must outlive the tape. For node i with neighbor list N(i):
///   e_ij = leaky_relu(src_score_i + dst_score_j), alpha = softmax_j(e_ij),
///   out_i = sum_j alpha_ij * features_j.
/// `features` is n x d; the scores are n x 1.
Var neighbor_attention(Var features, Var src_score, Var dst_score, const Adjacency& adj,
                       double slope);

/// Scaled dot-product attention inside fixed groups of tokens. Row blocks of
/// `group` consecutive rows form one group (one entity); columns are split into
/// `heads` equal head slices. Queries and keys/values must have the same group
/// count; rows attend only within their own group.
Var grouped_attention(Var queries, Var keys, Var values, Eigen::Index group, Eigen::Index heads);

}  // namespace pcmea::ad
