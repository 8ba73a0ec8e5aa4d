#include "rstcoref/autograd.hpp"

#include <cmath>

namespace rstcoref::ad {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, false, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, nullptr, &p, true, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || requires_grad(v);
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : nullptr, nullptr, needs, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.index())];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward needs a scalar root");
  for (Node& n : nodes_) n.has_grad = false;
  accumulate(root, Matrix::Ones(1, 1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) {
      // Copy: the closure may grow other nodes' grads but never this one.
      const Matrix g = n.grad;
      n.backward(g);
    } else if (n.param) {
      n.param->grad += n.grad;
    }
  }
}

void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    Eigen::Index bad = 0;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      if (!std::isfinite(m.data()[k])) ++bad;
    }
    throw NumericError(what + ": " + std::to_string(bad) + " non-finite value(s) in a " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " tensor");
  }
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b, &t](const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b, &t](const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row, &t](const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  return t.record(a.value() * factor, {a}, [a, factor, &t](const Matrix& g) { t.accumulate(a, g * factor); });
}

Var mul_const(Var a, const Matrix& mask) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(mask), {a},
                  [a, mask, &t](const Matrix& g) { t.accumulate(a, g.cwiseProduct(mask)); });
}

Var hadamard(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b, &t](const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix y = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  Matrix dy = (y.array() * (1.0 - y.array())).matrix();
  return t.record(std::move(y), {a}, [a, dy, &t](const Matrix& g) { t.accumulate(a, g.cwiseProduct(dy)); });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Matrix y = a.value().array().tanh().matrix();
  Matrix dy = (1.0 - y.array().square()).matrix();
  return t.record(std::move(y), {a}, [a, dy, &t](const Matrix& g) { t.accumulate(a, g.cwiseProduct(dy)); });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
  return t.record(a.value().cwiseProduct(mask), {a},
                  [a, mask, &t](const Matrix& g) { t.accumulate(a, g.cwiseProduct(mask)); });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().transpose(), {a}, [a, &t](const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return t.record(std::move(out), {a},
                  [a, r, c, &t](const Matrix& g) { t.accumulate(a, Matrix::Constant(r, c, g(0, 0))); });
}

Var concat_cols(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(out), parts, [parts, &t](const Matrix& g) {
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.record(std::move(out), parts, [parts, &t](const Matrix& g) {
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  return t.record(a.value().middleCols(start, count), {a}, [a, start, count, &t](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  return t.record(a.value().middleRows(start, count), {a}, [a, start, count, &t](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  return t.record(std::move(out), {a}, [a, rows, &t](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) full.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    t.accumulate(a, full);
  });
}

Var gather_elements(Var a, const std::vector<std::pair<int, int>>& positions) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(positions.size()), 1);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    out(static_cast<Eigen::Index>(k), 0) = a.value()(positions[k].first, positions[k].second);
  }
  return t.record(std::move(out), {a}, [a, positions, &t](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < positions.size(); ++k) {
      full(positions[k].first, positions[k].second) += g(static_cast<Eigen::Index>(k), 0);
    }
    t.accumulate(a, full);
  });
}

Var span_attention(Var x, Var logits, const std::vector<SpanRange>& spans) {
  Tape& t = *x.tape();
  const Matrix& xv = x.value();
  const Matrix& lv = logits.value();
  const Eigen::Index d = xv.cols();
  Matrix out(static_cast<Eigen::Index>(spans.size()), 3 * d);
  // Attention weights per span, kept for the backward pass.
  std::vector<Eigen::VectorXd> weights(spans.size());
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const int a = spans[s].start;
    const int len = spans[s].end - a + 1;
    Eigen::VectorXd w = lv.block(a, 0, len, 1);
    w = (w.array() - w.maxCoeff()).exp().matrix();
    w /= w.sum();
    const auto row = static_cast<Eigen::Index>(s);
    out.block(row, 0, 1, d) = xv.row(a);
    out.block(row, d, 1, d) = xv.row(spans[s].end);
    out.block(row, 2 * d, 1, d) = w.transpose() * xv.middleRows(a, len);
    weights[s] = std::move(w);
  }
  return t.record(std::move(out), {x, logits}, [x, logits, spans, weights, d, &t](const Matrix& g) {
    const Matrix& xv = x.value();
    Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
    Matrix dl = Matrix::Zero(xv.rows(), 1);
    for (std::size_t s = 0; s < spans.size(); ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      const int a = spans[s].start;
      const int len = spans[s].end - a + 1;
      dx.row(a) += g.block(row, 0, 1, d);
      dx.row(spans[s].end) += g.block(row, d, 1, d);
      const Eigen::RowVectorXd ga = g.block(row, 2 * d, 1, d);
      const Eigen::VectorXd& w = weights[s];
      dx.middleRows(a, len) += w * ga;
      // d alpha_t = ga . x_t ; d logit_t = alpha_t (d alpha_t - sum alpha d alpha)
      const Eigen::VectorXd dalpha = xv.middleRows(a, len) * ga.transpose();
      const double mean = w.dot(dalpha);
      dl.block(a, 0, len, 1) += (w.array() * (dalpha.array() - mean)).matrix();
    }
    if (t.requires_grad(x)) t.accumulate(x, dx);
    if (t.requires_grad(logits)) t.accumulate(logits, dl);
  });
}

Var marginal_nll(Var scores, const std::vector<int>& offsets, const std::vector<char>& gold) {
  Tape& t = *scores.tape();
  const Matrix& sv = scores.value();
  const std::size_t n_mentions = offsets.size() - 1;
  // dL/ds_k = p_k - q_k, p the softmax over {dummy} + candidates and q the
  // same softmax renormalized over the gold set.
  Matrix grad = Matrix::Zero(sv.rows(), 1);
  double loss = 0.0;
  for (std::size_t m = 0; m < n_mentions; ++m) {
    const int b = offsets[m];
    const int e = offsets[m + 1];
    bool any_gold = false;
    double mx = 0.0;  // dummy score
    for (int k = b; k < e; ++k) {
      mx = std::max(mx, sv(k, 0));
      any_gold = any_gold || gold[static_cast<std::size_t>(k)];
    }
    double z_all = std::exp(-mx);
    double z_gold = any_gold ? 0.0 : std::exp(-mx);
    for (int k = b; k < e; ++k) {
      const double w = std::exp(sv(k, 0) - mx);
      z_all += w;
      if (gold[static_cast<std::size_t>(k)]) z_gold += w;
    }
    loss += std::log(z_all) - std::log(z_gold);
    for (int k = b; k < e; ++k) {
      const double w = std::exp(sv(k, 0) - mx);
      grad(k, 0) = w / z_all - (gold[static_cast<std::size_t>(k)] ? w / z_gold : 0.0);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return t.record(std::move(out), {scores},
                  [scores, grad, &t](const Matrix& g) { t.accumulate(scores, grad * g(0, 0)); });
}

}  // namespace rstcoref::ad

namespace rstcoref::ad {

Var logistic_loss(Var logits, const std::vector<char>& targets) {
  Tape& t = *logits.tape();
  const Matrix& x = logits.value();
  if (x.cols() != 1 || static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw std::invalid_argument("logistic_loss: need one target per row of a column");
  }
  Matrix grad(x.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const double v = x(k, 0);
    const double y = targets[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
    // softplus(v) - y v, written to stay finite for large |v|
    loss += std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) - y * v;
    grad(k, 0) = 1.0 / (1.0 + std::exp(-v)) - y;
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return t.record(std::move(out), {logits},
                  [logits, grad, &t](const Matrix& g) { t.accumulate(logits, grad * g(0, 0)); });
}

}  // namespace rstcoref::ad
