#include <doctest.h>

#include <cmath>
#include <functional>

#include "rrg/autodiff.hpp"

using namespace rrg;

namespace {

// Central finite differences of a scalar-valued graph builder with respect to
// one parameter entry, compared against the tape's analytic gradient.
void check_param_grad(ParamStore& store, const std::string& name,
                      const std::function<Var(Tape&)>& build, double h = 1e-6,
                      double tol = 1e-6) {
  store.zero_grads();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  auto& entry = store.at(name);
  const Matrix analytic = entry.grad;
  for (Eigen::Index i = 0; i < entry.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < entry.value.cols(); ++j) {
      const double saved = entry.value(i, j);
      entry.value(i, j) = saved + h;
      Tape tp;
      const double up = build(tp).value()(0, 0);
      entry.value(i, j) = saved - h;
      Tape tm;
      const double down = build(tm).value()(0, 0);
      entry.value(i, j) = saved;
      const double numeric = (up - down) / (2 * h);
      CHECK(analytic(i, j) == doctest::Approx(numeric).epsilon(tol).scale(1.0));
    }
  }
}

Matrix arange(Eigen::Index rows, Eigen::Index cols, double scale = 0.1) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = scale * static_cast<double>(i * cols + j) - 0.3;
    }
  }
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("rng is deterministic and trunc_normal stays within two sigma") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = r.trunc_normal(0.02);
    CHECK(std::abs(v) <= 0.04 + 1e-15);
  }
  std::vector<int> v1{1, 2, 3, 4, 5}, v2{1, 2, 3, 4, 5};
  Rng s1(9), s2(9);
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_CASE("param store basics") {
  ParamStore store;
  auto& e = store.add("w", 2, 3);
  CHECK(e.value.isZero());
  CHECK_THROWS(store.add("w", 1, 1));
  CHECK_THROWS(store.at("missing"));
  CHECK(store.scalar_count() == 6);
}

TEST_CASE("matmul gradients, all transpose combinations") {
  ParamStore store;
  store.at(store.add("a", 3, 4).name).value = arange(3, 4);
  store.at(store.add("b", 4, 2).name).value = arange(4, 2, 0.2);

  for (const bool ta : {false, true}) {
    for (const bool tb : {false, true}) {
      auto build = [&, ta, tb](Tape& t) {
        Var a = t.leaf(store.at("a"));
        Var b = t.leaf(store.at("b"));
        // reshape operand matrices so every transpose combination is valid
        Var a2 = ta ? matmul(t.constant(Matrix::Identity(4, 4)), a, false, true) : a;
        Var b2 = tb ? matmul(t.constant(Matrix::Identity(2, 2)), b, false, true) : b;
        return sum_all(matmul(a2, b2, ta, tb));
      };
      check_param_grad(store, "a", build);
      check_param_grad(store, "b", build);
    }
  }
}

TEST_CASE("elementwise and structural op gradients") {
  ParamStore store;
  store.at(store.add("x", 3, 4).name).value = arange(3, 4, 0.3);
  store.at(store.add("row", 1, 4).name).value = arange(1, 4, 0.05);

  SUBCASE("add / sub / scale") {
    auto build = [&](Tape& t) {
      Var x = t.leaf(store.at("x"));
      Var y = add(x, scale(x, 0.5));
      return sum_all(sub(y, scale(x, 0.25)));
    };
    check_param_grad(store, "x", build);
  }
  SUBCASE("add_rowvec") {
    auto build = [&](Tape& t) {
      return sum_all(gelu(add_rowvec(t.leaf(store.at("x")), t.leaf(store.at("row")))));
    };
    check_param_grad(store, "x", build);
    check_param_grad(store, "row", build);
  }
  SUBCASE("gelu") {
    auto build = [&](Tape& t) { return sum_all(gelu(t.leaf(store.at("x")))); };
    check_param_grad(store, "x", build);
  }
  SUBCASE("softmax_rows weighted") {
    const Matrix weights = arange(3, 4, 0.7);
    auto build = [&, weights](Tape& t) {
      Var sm = softmax_rows(t.leaf(store.at("x")));
      return sum_all(matmul(sm, t.constant(weights), false, true));
    };
    check_param_grad(store, "x", build);
  }
  SUBCASE("gather / slice / concat / reshape") {
    const Matrix weights = arange(6, 2, 0.4);
    auto build = [&, weights](Tape& t) {
      Var x = t.leaf(store.at("x"));
      Var g = gather_rows(x, {2, 0, 0, 1});                 // repeats accumulate
      Var s = slice_cols(g, 1, 2);                          // [4, 2]
      Var c = concat_rows({s, slice_cols(g, 0, 2)});        // [8, 2]
      Var cc = concat_cols({c, c});                         // [8, 4]
      Var r = reshape_rm(cc, 4, 8);
      return sum_all(matmul(r, t.constant(Matrix::Ones(8, 1))));
      (void)weights;
    };
    check_param_grad(store, "x", build);
  }
}

TEST_CASE("layer norm value and gradient") {
  ParamStore store;
  store.at(store.add("x", 4, 6).name).value = arange(4, 6, 0.45);
  auto& gm = store.add("g", 1, 6);
  gm.value.setOnes();
  gm.value(0, 2) = 1.5;
  store.at(store.add("b", 1, 6).name).value = arange(1, 6, 0.02);

  // value: per-row zero mean / unit variance before the affine map
  Tape t;
  Var y = layer_norm_rows(t.leaf(store.at("x")), t.leaf(store.at("g")),
                          t.leaf(store.at("b")), 1e-12);
  Matrix normed = y.value();
  normed.rowwise() -= store.at("b").value.row(0);
  for (Eigen::Index i = 0; i < normed.rows(); ++i) {
    normed.row(i).array() /= store.at("g").value.row(0).array();
    CHECK(normed.row(i).mean() == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(normed.row(i).squaredNorm() / 6.0 == doctest::Approx(1.0).epsilon(1e-6));
  }

  const Matrix weights = arange(4, 6, 0.9);
  auto build = [&, weights](Tape& tp) {
    Var out = layer_norm_rows(tp.leaf(store.at("x")), tp.leaf(store.at("g")),
                              tp.leaf(store.at("b")));
    return sum_all(matmul(out, tp.constant(weights), false, true));
  };
  check_param_grad(store, "x", build, 1e-6, 1e-5);
  check_param_grad(store, "g", build, 1e-6, 1e-5);
  check_param_grad(store, "b", build, 1e-6, 1e-5);
}

TEST_CASE("cross entropy value and gradient") {
  ParamStore store;
  store.at(store.add("logits", 2, 3).name).value << 2.0, 0.5, -1.0, 0.1, 0.2, 0.3;

  // frozen from an independent log-softmax computation
  Tape t;
  Var nll = cross_entropy_sum(t.leaf(store.at("logits")), {0, 2}, {1, 1});
  CHECK(nll.value()(0, 0) ==
        doctest::Approx(0.24131129665715711 + 1.001942848229244).epsilon(1e-12));

  auto build = [&](Tape& tp) {
    return cross_entropy_sum(tp.leaf(store.at("logits")), {0, 2}, {1, 1});
  };
  check_param_grad(store, "logits", build);

  // inactive rows contribute nothing
  Tape t2;
  Var masked = cross_entropy_sum(t2.leaf(store.at("logits")), {0, 2}, {1, 0});
  CHECK(masked.value()(0, 0) == doctest::Approx(0.24131129665715711).epsilon(1e-12));

  CHECK_THROWS(cross_entropy_sum(t2.leaf(store.at("logits")), {0, 5}, {1, 1}));
}

TEST_CASE("masked softmax puts exact zeros on forbidden entries") {
  Tape t;
  const double ninf = -std::numeric_limits<double>::infinity();
  Matrix mask(2, 3);
  mask << 0, 0, ninf, 0, ninf, ninf;
  Var x = t.constant(Matrix::Ones(2, 3));
  const Matrix sm = softmax_rows(t.constant(mask + Matrix::Ones(2, 3))).value();
  CHECK(sm(0, 2) == 0.0);
  CHECK(sm(1, 1) == 0.0);
  CHECK(sm(1, 2) == 0.0);
  CHECK(sm(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sm(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  (void)x;
}

TEST_CASE("leaf gradients accumulate across multiple uses") {
  ParamStore store;
  store.at(store.add("w", 2, 2).name).value = arange(2, 2, 0.5);
  store.zero_grads();
  Tape t;
  Var w1 = t.leaf(store.at("w"));
  Var w2 = t.leaf(store.at("w"));  // weight tying: same storage, two uses
  Var loss = sum_all(add(w1, scale(w2, 2.0)));
  t.backward(loss);
  CHECK(store.at("w").grad == Matrix::Constant(2, 2, 3.0));
}

TEST_SUITE_END();
