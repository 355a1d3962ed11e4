#include "pcmea/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pcmea/error.hpp"

namespace pcmea::ad {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw FormatError(what);
}

Tape& tape_of(Var a) {
  assert(a.tape != nullptr);
  return *a.tape;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) {
    assert(p.tape == this);
    needs = needs || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[static_cast<std::size_t>(v.id)];
  if (!node.has_grad) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& node = nodes_[static_cast<std::size_t>(v.id)];
  if (!node.needs_grad) return;
  assert(g.rows() == node.value.rows() && g.cols() == node.value.cols());
  if (node.has_grad) {
    node.grad += g;
  } else {
    node.grad = g;
    node.has_grad = true;
  }
}

void Tape::backward(Var target) {
  if (target.tape != this) throw std::logic_error("backward target belongs to another tape");
  const auto& t = nodes_[static_cast<std::size_t>(target.id)].value;
  if (t.rows() != 1 || t.cols() != 1) throw std::logic_error("backward target must be 1x1");
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad.resize(0, 0);
  }
  accumulate(target, Matrix::Ones(1, 1));
  for (int i = target.id; i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.has_grad && node.backward) node.backward(*this, node.value, node.grad);
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  auto& t = tape_of(a);
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

Var transpose(Var a) {
  return tape_of(a).record(a.value().transpose(), {a},
                           [a](Tape& tp, const Matrix&, const Matrix& g) { tp.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

Var scale(Var a, double s) {
  return tape_of(a).record(a.value() * s, {a},
                           [a, s](Tape& tp, const Matrix&, const Matrix& g) { tp.accumulate(a, g * s); });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) { tp.accumulate(a, g); });
}

Var add_row(Var a, Var b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(b)) tp.accumulate(b, g.colwise().sum());
  });
}

Var mul_scalar(Var a, Var s) {
  require(s.rows() == 1 && s.cols() == 1, "mul_scalar: scale must be 1 x 1");
  Matrix out = a.value() * s.scalar();
  return tape_of(a).record(std::move(out), {a, s}, [a, s](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(s)(0, 0));
    if (tp.needs_grad(s)) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(a)).sum();
      tp.accumulate(s, gs);
    }
  });
}

// ---------------------------------------------------------------------------

Var leaky_relu(Var a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return tape_of(a).record(std::move(out), {a}, [a, slope](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = tp.value(a).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var elu(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = tp.value(a).unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  });
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = tp.value(a).unaryExpr([](double x) {
      const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix& y, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix& y, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(y));
  });
}

Var log(Var a) {
  Matrix out = a.value().array().log();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, g.cwiseQuotient(tp.value(a)));
  });
}

Var log_add_exp(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "log_add_exp: shape mismatch");
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double m = std::max(x.data()[i], y.data()[i]);
    out.data()[i] = m + std::log1p(std::exp(-std::abs(x.data()[i] - y.data()[i])));
  }
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    const Matrix& x = tp.value(a);
    const Matrix& y = tp.value(b);
    Matrix wa(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      wa.data()[i] = 1.0 / (1.0 + std::exp(y.data()[i] - x.data()[i]));
    }
    tp.accumulate(a, g.cwiseProduct(wa));
    tp.accumulate(b, g.cwiseProduct(Matrix(1.0 - wa.array())));
  });
}

// ---------------------------------------------------------------------------

namespace {

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

Var row_softmax(Var a) {
  return tape_of(a).record(softmax_rows(a.value()), {a}, [a](Tape& tp, const Matrix& p, const Matrix& g) {
    Matrix dot = g.cwiseProduct(p).rowwise().sum();
    Matrix d = p.cwiseProduct(g - dot.replicate(1, g.cols()));
    tp.accumulate(a, d);
  });
}

Var row_log_softmax(Var a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask) {
  const Matrix& x = a.value();
  require(mask.rows() == x.rows() && mask.cols() == x.cols(), "row_log_softmax: mask shape mismatch");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  Matrix prob = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) m = std::max(m, x(r, c));
    }
    require(std::isfinite(m), "row_log_softmax: row without live entries");
    double s = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) s += std::exp(x(r, c) - m);
    }
    const double lse = m + std::log(s);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) {
        out(r, c) = x(r, c) - lse;
        prob(r, c) = std::exp(out(r, c));
      }
    }
  }
  return tape_of(a).record(std::move(out), {a}, [a, prob, mask](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix gm = mask.select(g, 0.0);
    Matrix total = gm.rowwise().sum();
    Matrix d = gm - prob.cwiseProduct(total.replicate(1, g.cols()));
    tp.accumulate(a, d);
  });
}

Var row_normalize(Var a, double eps) {
  const Matrix& x = a.value();
  Vector norms = x.rowwise().norm().cwiseMax(eps);
  Matrix out = x.array().colwise() / norms.array();
  return tape_of(a).record(std::move(out), {a}, [a, norms](Tape& tp, const Matrix& y, const Matrix& g) {
    Vector dots = g.cwiseProduct(y).rowwise().sum();
    Matrix d = g - (y.array().colwise() * dots.array()).matrix();
    d.array().colwise() /= norms.array();
    tp.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, Matrix::Constant(tp.value(a).rows(), tp.value(a).cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  require(n > 0, "mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var log_mean_exp(Var a) {
  const Matrix& x = a.value();
  require(x.size() > 0, "log_mean_exp of empty matrix");
  const double m = x.maxCoeff();
  Matrix w = (x.array() - m).exp();
  const double s = w.sum();
  w /= s;
  Matrix out(1, 1);
  out(0, 0) = m + std::log(s) - std::log(static_cast<double>(x.size()));
  return tape_of(a).record(std::move(out), {a}, [a, w](Tape& tp, const Matrix&, const Matrix& g) {
    tp.accumulate(a, w * g(0, 0));
  });
}

// ---------------------------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return tape_of(parts.front())
      .record(std::move(out), parts, [saved, offsets](Tape& tp, const Matrix&, const Matrix& g) {
        for (std::size_t k = 0; k < saved.size(); ++k) {
          if (tp.needs_grad(saved[k])) tp.accumulate(saved[k], g.middleCols(offsets[k], saved[k].cols()));
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return tape_of(parts.front())
      .record(std::move(out), parts, [saved, offsets](Tape& tp, const Matrix&, const Matrix& g) {
        for (std::size_t k = 0; k < saved.size(); ++k) {
          if (tp.needs_grad(saved[k])) tp.accumulate(saved[k], g.middleRows(offsets[k], saved[k].rows()));
        }
      });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return tape_of(a).record(std::move(out), {a}, [a, start, count](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    d.middleCols(start, count) = g;
    tp.accumulate(a, d);
  });
}

Var gather_rows(Var a, std::span<const EntityIndex> rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(static_cast<Eigen::Index>(rows[i]) < x.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  std::vector<EntityIndex> idx(rows.begin(), rows.end());
  return tape_of(a).record(std::move(out), {a}, [a, idx](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(a, d);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& x = a.value();
  require(rows * cols == x.size(), "reshape: size mismatch");
  Matrix out = Eigen::Map<const Matrix>(x.data(), rows, cols);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    const Matrix& x = tp.value(a);
    tp.accumulate(a, Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols()));
  });
}

Var diagonal(Var a) {
  require(a.rows() == a.cols(), "diagonal: matrix must be square");
  Matrix out = a.value().diagonal();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    d.diagonal() = g.col(0);
    tp.accumulate(a, d);
  });
}

Var entry(Var a, Eigen::Index r, Eigen::Index c) {
  require(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "entry: out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(r, c);
  return tape_of(a).record(std::move(out), {a}, [a, r, c](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix d = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    d(r, c) = g(0, 0);
    tp.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------

Var neighbor_attention(Var features, Var src_score, Var dst_score, const Adjacency& adj,
                       double slope) {
  const Matrix& x = features.value();
  const Matrix& s = src_score.value();
  const Matrix& t = dst_score.value();
  const auto n = static_cast<Eigen::Index>(adj.num_nodes());
  require(x.rows() == n && s.rows() == n && t.rows() == n && s.cols() == 1 && t.cols() == 1,
          "neighbor_attention: shape mismatch");

  // Edge-wise attention weights and pre-activation signs, in adjacency order.
  std::vector<double> alpha;
  std::vector<double> dlogit;
  alpha.reserve(adj.num_edges());
  dlogit.reserve(adj.num_edges());
  Matrix out = Matrix::Zero(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& nbrs = adj.neighbors[static_cast<std::size_t>(i)];
    if (nbrs.empty()) throw std::logic_error("neighbor_attention: node without neighbors");
    const std::size_t base = alpha.size();
    double m = -std::numeric_limits<double>::infinity();
    for (auto j : nbrs) {
      const double e = s(i, 0) + t(j, 0);
      const double z = e > 0.0 ? e : slope * e;
      alpha.push_back(z);
      dlogit.push_back(e > 0.0 ? 1.0 : slope);
      m = std::max(m, z);
    }
    double total = 0.0;
    for (std::size_t k = base; k < alpha.size(); ++k) {
      alpha[k] = std::exp(alpha[k] - m);
      total += alpha[k];
    }
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      alpha[base + k] /= total;
      out.row(i) += alpha[base + k] * x.row(nbrs[k]);
    }
  }

  return tape_of(features).record(
      std::move(out), {features, src_score, dst_score},
      [features, src_score, dst_score, &adj, alpha = std::move(alpha), dlogit = std::move(dlogit)](
          Tape& tp, const Matrix&, const Matrix& g) {
        const Matrix& x = tp.value(features);
        const auto n = x.rows();
        Matrix dx = Matrix::Zero(n, x.cols());
        Matrix ds = Matrix::Zero(n, 1);
        Matrix dt = Matrix::Zero(n, 1);
        std::size_t base = 0;
        std::vector<double> dalpha;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& nbrs = adj.neighbors[static_cast<std::size_t>(i)];
          dalpha.resize(nbrs.size());
          double weighted = 0.0;
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double a = alpha[base + k];
            dx.row(nbrs[k]) += a * g.row(i);
            dalpha[k] = g.row(i).dot(x.row(nbrs[k]));
            weighted += a * dalpha[k];
          }
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double dz = alpha[base + k] * (dalpha[k] - weighted);
            const double de = dz * dlogit[base + k];
            ds(i, 0) += de;
            dt(nbrs[k], 0) += de;
          }
          base += nbrs.size();
        }
        tp.accumulate(features, dx);
        tp.accumulate(src_score, ds);
        tp.accumulate(dst_score, dt);
      });
}

Var grouped_attention(Var queries, Var keys, Var values, Eigen::Index group, Eigen::Index heads) {
  const Matrix& q = queries.value();
  const Matrix& k = keys.value();
  const Matrix& v = values.value();
  require(group >= 1 && heads >= 1, "grouped_attention: group and heads must be positive");
  require(q.rows() % group == 0 && q.rows() == k.rows() && k.rows() == v.rows(),
          "grouped_attention: row counts must match and divide into groups");
  require(q.cols() == k.cols() && q.cols() % heads == 0 && v.cols() % heads == 0,
          "grouped_attention: head split mismatch");
  const Eigen::Index groups = q.rows() / group;
  const Eigen::Index dk = q.cols() / heads;
  const Eigen::Index dv = v.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  // Probabilities stored per (group, head) as consecutive group x group blocks.
  Matrix probs(groups * heads * group, group);
  Matrix out(q.rows(), v.cols());
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix scores = q.block(gi * group, h * dk, group, dk) * k.block(gi * group, h * dk, group, dk).transpose();
      scores *= inv_sqrt;
      Matrix p = softmax_rows(scores);
      out.block(gi * group, h * dv, group, dv) = p * v.block(gi * group, h * dv, group, dv);
      probs.block((gi * heads + h) * group, 0, group, group) = p;
    }
  }

  return tape_of(queries).record(
      std::move(out), {queries, keys, values},
      [queries, keys, values, probs = std::move(probs), group, heads, groups, dk, dv, inv_sqrt](
          Tape& tp, const Matrix&, const Matrix& g) {
        const Matrix& q = tp.value(queries);
        const Matrix& k = tp.value(keys);
        const Matrix& v = tp.value(values);
        Matrix dq = Matrix::Zero(q.rows(), q.cols());
        Matrix dk_m = Matrix::Zero(k.rows(), k.cols());
        Matrix dv_m = Matrix::Zero(v.rows(), v.cols());
        for (Eigen::Index gi = 0; gi < groups; ++gi) {
          for (Eigen::Index h = 0; h < heads; ++h) {
            const auto p = probs.block((gi * heads + h) * group, 0, group, group);
            const auto go = g.block(gi * group, h * dv, group, dv);
            dv_m.block(gi * group, h * dv, group, dv) += p.transpose() * go;
            Matrix dp = go * v.block(gi * group, h * dv, group, dv).transpose();
            Matrix rowdot = dp.cwiseProduct(p).rowwise().sum();
            Matrix ds = p.cwiseProduct(dp - rowdot.replicate(1, group)) * inv_sqrt;
            dq.block(gi * group, h * dk, group, dk) += ds * k.block(gi * group, h * dk, group, dk);
            dk_m.block(gi * group, h * dk, group, dk) += ds.transpose() * q.block(gi * group, h * dk, group, dk);
          }
        }
        tp.accumulate(queries, dq);
        tp.accumulate(keys, dk_m);
        tp.accumulate(values, dv_m);
      });
}

}  // namespace pcmea::ad
