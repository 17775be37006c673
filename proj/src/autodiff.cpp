#include "rrg/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rrg {

// -- rng ------------------------------------------------------------------------

std::uint64_t Rng::next_u64() {
  // splitmix64; small state, solid distribution, trivially portable
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t x = state_;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::trunc_normal(double stddev) {
  double z = normal();
  while (std::abs(z) > 2.0) z = normal();
  return stddev * z;
}

// -- param store ------------------------------------------------------------------

ParamStore::Entry& ParamStore::add(const std::string& name, Eigen::Index rows,
                                   Eigen::Index cols) {
  if (has(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return entries_.back();
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second];
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.grad.setZero();
}

void ParamStore::scale_grads(double s) {
  for (auto& e : entries_) e.grad *= s;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

// -- tape ---------------------------------------------------------------------------

const Matrix& Var::value() const { return tape->val(idx); }

Var Tape::leaf(ParamStore::Entry& param) {
  Node node;
  node.value = param.value;
  node.needs_grad = true;
  ParamStore::Entry* p = &param;
  node.backprop = [p](Tape& t, int idx) { p->grad += t.grad(idx); };
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = false;
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Matrix value, const std::vector<Var>& parents,
               std::function<void(Tape&, int)> backprop) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) throw std::invalid_argument("op mixes nodes from different tapes");
    node.needs_grad = node.needs_grad || nodes_[static_cast<std::size_t>(p.idx)].needs_grad;
  }
  if (node.needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int idx) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss not on this tape");
  const Node& ln = nodes_[static_cast<std::size_t>(loss.idx)];
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be 1x1");
  }
  grad(loss.idx)(0, 0) += 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad && n.grad.size() > 0 && n.backprop) n.backprop(*this, i);
  }
}

// -- op helpers ----------------------------------------------------------------------

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  return a.tape->make(a.value() + b.value(), {a, b}, [a, b](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    if (t.needs_grad(a.idx)) t.grad(a.idx) += g;
    if (t.needs_grad(b.idx)) t.grad(b.idx) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  return a.tape->make(a.value() - b.value(), {a, b}, [a, b](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    if (t.needs_grad(a.idx)) t.grad(a.idx) += g;
    if (t.needs_grad(b.idx)) t.grad(b.idx) -= g;
  });
}

Var add_rowvec(Var a, Var row) {
  if (row.value().rows() != 1 || row.value().cols() != a.value().cols()) {
    throw std::invalid_argument("add_rowvec: row must be [1, cols(a)]");
  }
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return a.tape->make(std::move(v), {a, row}, [a, row](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    if (t.needs_grad(a.idx)) t.grad(a.idx) += g;
    if (t.needs_grad(row.idx)) t.grad(row.idx) += g.colwise().sum();
  });
}

Var add_const(Var a, const Matrix& m) {
  check_same_shape(a.value(), m, "add_const");
  return a.tape->make(a.value() + m, {a}, [a](Tape& t, int idx) {
    if (t.needs_grad(a.idx)) t.grad(a.idx) += t.grad(idx);
  });
}

Var scale(Var a, double s) {
  return a.tape->make(a.value() * s, {a}, [a, s](Tape& t, int idx) {
    if (t.needs_grad(a.idx)) t.grad(a.idx) += s * t.grad(idx);
  });
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  const Eigen::Index inner_a = trans_a ? A.rows() : A.cols();
  const Eigen::Index inner_b = trans_b ? B.cols() : B.rows();
  if (inner_a != inner_b) {
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(inner_a) +
                                " vs " + std::to_string(inner_b));
  }
  Matrix v;
  if (!trans_a && !trans_b) v = A * B;
  else if (!trans_a && trans_b) v = A * B.transpose();
  else if (trans_a && !trans_b) v = A.transpose() * B;
  else v = A.transpose() * B.transpose();

  return a.tape->make(std::move(v), {a, b}, [a, b, trans_a, trans_b](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    const Matrix& A = t.val(a.idx);
    const Matrix& B = t.val(b.idx);
    if (t.needs_grad(a.idx)) {
      Matrix& ga = t.grad(a.idx);
      if (!trans_a && !trans_b) ga.noalias() += g * B.transpose();
      else if (!trans_a && trans_b) ga.noalias() += g * B;
      else if (trans_a && !trans_b) ga.noalias() += B * g.transpose();
      else ga.noalias() += B.transpose() * g.transpose();
    }
    if (t.needs_grad(b.idx)) {
      Matrix& gb = t.grad(b.idx);
      if (!trans_a && !trans_b) gb.noalias() += A.transpose() * g;
      else if (!trans_a && trans_b) gb.noalias() += g.transpose() * A;
      else if (trans_a && !trans_b) gb.noalias() += A * g;
      else gb.noalias() += g.transpose() * A.transpose();
    }
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    // exp(-inf - m) is exactly 0, so masked entries drop out
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return a.tape->make(std::move(y), {a}, [a](Tape& t, int idx) {
    if (!t.needs_grad(a.idx)) return;
    const Matrix& y = t.val(idx);
    const Matrix& g = t.grad(idx);
    Matrix& ga = t.grad(a.idx);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Matrix& v = x.value();
  const Eigen::Index d = v.cols();
  if (gamma.value().rows() != 1 || gamma.value().cols() != d ||
      beta.value().rows() != 1 || beta.value().cols() != d) {
    throw std::invalid_argument("layer_norm_rows: gamma/beta must be [1, cols(x)]");
  }
  Matrix xhat(v.rows(), d);
  Eigen::VectorXd inv_std(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double mu = v.row(i).mean();
    const double var = (v.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (v.row(i).array() - mu) * inv_std(i);
  }
  Matrix y = xhat;
  y.array().rowwise() *= gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);

  return x.tape->make(std::move(y), {x, gamma, beta},
                      [x, gamma, beta, xhat, inv_std](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    if (t.needs_grad(gamma.idx)) {
      t.grad(gamma.idx) += (g.array() * xhat.array()).colwise().sum().matrix();
    }
    if (t.needs_grad(beta.idx)) t.grad(beta.idx) += g.colwise().sum();
    if (t.needs_grad(x.idx)) {
      Matrix& gx = t.grad(x.idx);
      const auto gamma_row = t.val(gamma.idx).row(0).array();
      using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const RowArray dxhat = g.row(i).array() * gamma_row;
        const RowArray xh = xhat.row(i).array();
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = (dxhat * xh).mean();
        gx.row(i).array() += inv_std(i) * (dxhat - mean_dxhat - xh * mean_dxhat_xhat);
      }
    }
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Matrix y = x.unaryExpr(
      [inv_sqrt2](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  return a.tape->make(std::move(y), {a}, [a, inv_sqrt2](Tape& t, int idx) {
    if (!t.needs_grad(a.idx)) return;
    const Matrix& x = t.val(a.idx);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const Matrix dydx = x.unaryExpr([inv_sqrt2, inv_sqrt2pi](double v) {
      return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) +
             v * inv_sqrt2pi * std::exp(-0.5 * v * v);
    });
    t.grad(a.idx).array() += t.grad(idx).array() * dydx.array();
  });
}

Var gather_rows(Var a, std::vector<int> rows) {
  const Matrix& x = a.value();
  Matrix y(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(rows[i]) +
                              " out of range [0, " + std::to_string(x.rows()) + ")");
    }
    y.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return a.tape->make(std::move(y), {a}, [a, rows = std::move(rows)](Tape& t, int idx) {
    if (!t.needs_grad(a.idx)) return;
    const Matrix& g = t.grad(idx);
    Matrix& ga = t.grad(a.idx);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var slice_rows(Var a, int start, int count) {
  const Matrix& x = a.value();
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw std::out_of_range("slice_rows: range out of bounds");
  }
  return a.tape->make(x.middleRows(start, count), {a}, [a, start, count](Tape& t, int idx) {
    if (t.needs_grad(a.idx)) t.grad(a.idx).middleRows(start, count) += t.grad(idx);
  });
}

Var slice_cols(Var a, int start, int count) {
  const Matrix& x = a.value();
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw std::out_of_range("slice_cols: range out of bounds");
  }
  return a.tape->make(x.middleCols(start, count), {a}, [a, start, count](Tape& t, int idx) {
    if (t.needs_grad(a.idx)) t.grad(a.idx).middleCols(start, count) += t.grad(idx);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].value().cols();
  for (const Var& p : parts) {
    if (p.value().cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.value().rows();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleRows(at, p.value().rows()) = p.value();
    at += p.value().rows();
  }
  return parts[0].tape->make(std::move(y), parts, [parts](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      const Eigen::Index n = t.val(p.idx).rows();
      if (t.needs_grad(p.idx)) t.grad(p.idx) += g.middleRows(at, n);
      at += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].value().rows();
  for (const Var& p : parts) {
    if (p.value().rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.value().cols();
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.value().cols()) = p.value();
    at += p.value().cols();
  }
  return parts[0].tape->make(std::move(y), parts, [parts](Tape& t, int idx) {
    const Matrix& g = t.grad(idx);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
      const Eigen::Index n = t.val(p.idx).cols();
      if (t.needs_grad(p.idx)) t.grad(p.idx) += g.middleCols(at, n);
      at += n;
    }
  });
}

Var reshape_rm(Var a, int rows, int cols) {
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(rows) * cols != x.size()) {
    throw std::invalid_argument("reshape_rm: element count mismatch");
  }
  const Eigen::Index old_cols = x.cols();
  Matrix y(rows, cols);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    y(k / cols, k % cols) = x(k / old_cols, k % old_cols);
  }
  return a.tape->make(std::move(y), {a}, [a, cols, old_cols](Tape& t, int idx) {
    if (!t.needs_grad(a.idx)) return;
    const Matrix& g = t.grad(idx);
    Matrix& ga = t.grad(a.idx);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      ga(k / old_cols, k % old_cols) += g(k / cols, k % cols);
    }
  });
}

Var sum_all(Var a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->make(std::move(y), {a}, [a](Tape& t, int idx) {
    if (t.needs_grad(a.idx)) t.grad(a.idx).array() += t.grad(idx)(0, 0);
  });
}

Var cross_entropy_sum(Var logits, std::vector<int> targets, std::vector<char> active) {
  const Matrix& x = logits.value();
  if (targets.size() != static_cast<std::size_t>(x.rows()) || active.size() != targets.size()) {
    throw std::invalid_argument("cross_entropy_sum: targets/active must match logits rows");
  }
  double loss = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!active[static_cast<std::size_t>(i)]) continue;
    const int tgt = targets[static_cast<std::size_t>(i)];
    if (tgt < 0 || tgt >= x.cols()) {
      throw std::out_of_range("cross_entropy_sum: target id " + std::to_string(tgt) +
                              " out of range for vocab " + std::to_string(x.cols()));
    }
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    loss += lse - x(i, tgt);
  }
  Matrix y(1, 1);
  y(0, 0) = loss;
  return logits.tape->make(std::move(y), {logits},
                           [logits, targets = std::move(targets),
                            active = std::move(active)](Tape& t, int idx) {
    if (!t.needs_grad(logits.idx)) return;
    const double g = t.grad(idx)(0, 0);
    const Matrix& x = t.val(logits.idx);
    Matrix& gx = t.grad(logits.idx);
    using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      const double m = x.row(i).maxCoeff();
      RowArray p = (x.row(i).array() - m).exp();
      p /= p.sum();
      gx.row(i).array() += g * p;
      gx(i, targets[static_cast<std::size_t>(i)]) -= g;
    }
  });
}

}  // namespace rrg
