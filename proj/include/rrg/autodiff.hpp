#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rrg {

using Matrix = Eigen::MatrixXd;

// Deterministic RNG helpers built on mt19937_64 so initialization and
// shuffling are reproducible independent of library distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double normal();                     // Box-Muller
  double trunc_normal(double stddev);  // rejects |z| > 2 before scaling
  // Fisher-Yates; identical results for identical seeds on any platform.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Named learnable arrays plus their gradient accumulators. Creation order is
// the canonical serialization order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
  };

  // Zero-initialized unless filled afterwards; name must be fresh. Returned
  // references stay valid across later adds.
  Entry& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }

  void zero_grads();
  void scale_grads(double s);
  std::size_t scalar_count() const;

 private:
  std::deque<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a node on a tape. Values are computed eagerly at creation;
// backward() later sweeps the tape in reverse.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  const Matrix& value() const;
};

class Tape {
 public:
  Var leaf(ParamStore::Entry& param);      // gradient accumulates into the store
  Var constant(Matrix value);              // no gradient flows

  // Low-level node constructor used by the op free functions. The backprop
  // callback reads grad(idx) and accumulates into its parents.
  Var make(Matrix value, const std::vector<Var>& parents,
           std::function<void(Tape&, int)> backprop);

  const Matrix& val(int idx) const { return nodes_[static_cast<std::size_t>(idx)].value; }
  // Gradient buffer, allocated as zeros on first touch.
  Matrix& grad(int idx);
  bool needs_grad(int idx) const { return nodes_[static_cast<std::size_t>(idx)].needs_grad; }
  bool has_grad(int idx) const { return nodes_[static_cast<std::size_t>(idx)].grad.size() > 0; }

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and runs the reverse sweep.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void reset() { nodes_.clear(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, int)> backprop;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// -- ops ----------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_rowvec(Var a, Var row);              // row is [1, D]
Var add_const(Var a, const Matrix& m);       // m may contain -inf (attention masks)
Var scale(Var a, double s);
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
Var gelu(Var a);
Var gather_rows(Var a, std::vector<int> rows);  // repeats allowed (embedding lookup)
Var slice_rows(Var a, int start, int count);
Var slice_cols(Var a, int start, int count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var reshape_rm(Var a, int rows, int cols);      // row-major element order
Var sum_all(Var a);                             // [1,1]

// Sum over rows listed in `active` of -log softmax(logits.row(i))[target[i]].
Var cross_entropy_sum(Var logits, std::vector<int> targets, std::vector<char> active);

}  // namespace rrg
