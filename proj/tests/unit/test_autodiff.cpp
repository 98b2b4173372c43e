#include <cmath>
#include <vector>

#include "doctest.h"
#include "g2s/adam.hpp"
#include "g2s/autodiff.hpp"
#include "g2s/gradcheck.hpp"

using namespace g2s;
using namespace g2s::ad;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = true) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Mean squared output: every entry influences the loss and repeated calls
// are bit-identical, which grad_check requires.
template <typename T>
Tensor<T> mix_to_scalar(Tape<T>* tape, const Tensor<T>& out) {
  auto s = sum_all(tape, mul(tape, out, out));
  return mul(tape, s, Tensor<T>::scalar(T(0.5) / static_cast<T>(out.size())));
}

using NamedParams = std::vector<std::pair<std::string, Tensor<double>>>;

}  // namespace

TEST_CASE("softmax matches closed forms") {
  auto two = Tensor<double>::from({2}, {0.0, 0.0});
  auto s = softmax<double>(nullptr, two);
  CHECK(s.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.at(1) == doctest::Approx(0.5).epsilon(1e-12));

  auto logits = Tensor<double>::from({2}, {std::log(3.0), 0.0});
  auto p = softmax<double>(nullptr, logits);
  CHECK(p.at(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax rows are normalized and shift invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor<double>({4, 9}, rng, -5.0, 5.0, false);
    auto y = softmax<double>(nullptr, x);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        sum += y.at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    const double shift = rng.uniform(-100.0, 100.0);
    auto xs = Tensor<double>::zeros({4, 9});
    for (std::size_t i = 0; i < x.size(); ++i) xs.at(i) = x.at(i) + shift;
    auto ys = softmax<double>(nullptr, xs);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(ys.at(i) == doctest::Approx(y.at(i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("layer normalization of a constant row is the shift") {
  auto x = Tensor<double>::from({1, 4}, {3.5, 3.5, 3.5, 3.5});
  auto gamma = Tensor<double>::full({4}, 1.0);
  auto beta = Tensor<double>::zeros({4});
  auto y = layer_norm<double>(nullptr, x, gamma, beta, 1e-5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("segment sum groups rows") {
  auto x = Tensor<double>::from({3, 1}, {1.0, 2.0, 3.0});
  auto y = segment_sum<double>(nullptr, x, make_ids({0, 0, 1}), 2);
  CHECK(y.at(0, 0) == doctest::Approx(3.0));
  CHECK(y.at(1, 0) == doctest::Approx(3.0));
}

TEST_CASE("segment softmax normalizes inside each segment") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int32_t> seg;
    const std::size_t groups = 1 + rng.below(4);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t n = 1 + rng.below(5);
      for (std::size_t i = 0; i < n; ++i) seg.push_back(static_cast<std::int32_t>(g));
    }
    auto x = random_tensor<double>({seg.size(), 1}, rng, -30.0, 30.0, false);
    auto y = segment_softmax<double>(nullptr, x, make_ids(seg), groups);
    std::vector<double> sums(groups, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      CHECK(y.at(i) >= 0.0);
      sums[static_cast<std::size_t>(seg[i])] += y.at(i);
    }
    for (double s : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("shape errors name the operation") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({4, 5});
  CHECK_THROWS_WITH_AS(matmul<double>(nullptr, a, b), doctest::Contains("matmul"),
                       ShapeError);
  auto c = Tensor<double>::zeros({3, 2});
  CHECK_THROWS_AS(add<double>(nullptr, a, c), ShapeError);
  CHECK_THROWS_AS(segment_sum<double>(nullptr, a, make_ids({0}), 1), ShapeError);
}

TEST_CASE("non-finite outputs raise numeric errors") {
  auto z = Tensor<double>::from({2}, {0.0, 1.0});
  CHECK_THROWS_AS(log_op<double>(nullptr, z), NumericError);
  auto big = Tensor<double>::from({1}, {1e308});
  CHECK_THROWS_AS(exp_op<double>(nullptr, big), NumericError);
}

TEST_CASE("backward of a dot product gives the other operand") {
  Tape<double> tape;
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto y = Tensor<double>::from({2}, {3.0, 4.0}, true);
  auto loss = sum_all(&tape, mul(&tape, x, y));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(y.grad()[0] == doctest::Approx(1.0));
  CHECK(y.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward of summed relu gates negative entries") {
  Tape<double> tape;
  auto x = Tensor<double>::from({2}, {-1.0, 2.0}, true);
  auto loss = sum_all(&tape, relu(&tape, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(0.0));
  CHECK(x.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("backward requires a scalar loss") {
  Tape<double> tape;
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto y = relu(&tape, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("unreached leaves receive a zero gradient") {
  Tape<double> tape;
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto unused = Tensor<double>::from({3}, {1.0, 1.0, 1.0}, true);
  auto loss = sum_all(&tape, x);
  std::vector<Tensor<double>> leaves = {x, unused};
  tape.backward(loss, leaves);
  REQUIRE(unused.has_grad());
  for (double g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("two layer perceptron gradients match finite differences") {
  Rng rng(3);
  auto w1 = random_tensor<double>({4, 6}, rng);
  auto b1 = random_tensor<double>({6}, rng);
  auto w2 = random_tensor<double>({6, 1}, rng);
  auto x = random_tensor<double>({5, 4}, rng, -1.0, 1.0, false);
  NamedParams params = {{"w1", w1}, {"b1", b1}, {"w2", w2}};
  auto f = [&](Tape<double>* tape) {
    auto h = tanh_op(tape, add(tape, matmul(tape, x, w1), b1));
    return sum_all(tape, matmul(tape, h, w2));
  };
  CHECK(grad_check<double>(f, params, 1e-5, 1e-4) < 1e-6);
}

TEST_CASE("gradient check is exact for a linear map") {
  Rng rng(5);
  auto a = random_tensor<double>({7}, rng);
  auto coef = random_tensor<double>({7}, rng, -2.0, 2.0, false);
  NamedParams params = {{"a", a}};
  auto f = [&](Tape<double>* tape) { return sum_all(tape, mul(tape, a, coef)); };
  CHECK(grad_check<double>(f, params, 0.1) < 1e-10);
}

TEST_CASE("finite difference error of a cubic grows with the squared step") {
  Rng rng(9);
  auto x = random_tensor<double>({6}, rng, 0.5, 1.5);
  NamedParams params = {{"x", x}};
  auto f = [&](Tape<double>* tape) {
    return sum_all(tape, mul(tape, mul(tape, x, x), x));
  };
  const double err_big = grad_check<double>(f, params, 1e-1);
  const double err_small = grad_check<double>(f, params, 1e-2);
  CHECK(err_big > err_small);
  const double ratio = err_big / err_small;
  CHECK(ratio > 80.0);
  CHECK(ratio < 125.0);
}

TEST_CASE("gradcheck rejects non-deterministic functions") {
  Rng rng(13);
  auto x = random_tensor<double>({3}, rng);
  NamedParams params = {{"x", x}};
  Rng noise(1);
  auto f = [&](Tape<double>* tape) {
    auto jitter = Tensor<double>::scalar(noise.uniform());
    return sum_all(tape, mul(tape, x, jitter));
  };
  CHECK_THROWS_AS(grad_check<double>(f, params), ContractError);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(17);
  auto x = random_tensor<double>({5}, rng);
  auto cf = random_tensor<double>({5}, rng, -1.0, 1.0, false);
  auto cg = random_tensor<double>({5}, rng, -1.0, 1.0, false);
  const double a = 1.7;
  const double b = -0.6;

  auto grads_of = [&](bool use_f, bool use_g) {
    x.zero_grad();
    Tape<double> tape;
    auto f = sum_all(&tape, mul(&tape, relu(&tape, x), cf));
    auto g = sum_all(&tape, mul(&tape, tanh_op(&tape, x), cg));
    Tensor<double> loss;
    if (use_f && use_g) {
      loss = add(&tape, mul(&tape, f, Tensor<double>::scalar(a)),
                 mul(&tape, g, Tensor<double>::scalar(b)));
    } else {
      loss = use_f ? f : g;
    }
    tape.backward(loss);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };

  auto gf = grads_of(true, false);
  auto gg = grads_of(false, true);
  auto gc = grads_of(true, true);
  for (std::size_t i = 0; i < gf.size(); ++i) {
    CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-10));
  }
}

TEST_CASE("dropout is the identity in evaluation mode and rescales in training") {
  Rng rng(23);
  auto x = random_tensor<double>({50, 4}, rng, 0.5, 1.5, false);
  Rng unused(0);
  auto eval_out = dropout<double>(nullptr, x, 0.4, unused, false);
  CHECK(eval_out.same_buffer(x));

  Rng drop_rng(99);
  auto train_out = dropout<double>(nullptr, x, 0.4, drop_rng, true);
  std::size_t kept = 0;
  const double q = 0.6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = train_out.at(i);
    if (v == 0.0) continue;
    ++kept;
    CHECK(v == doctest::Approx(x.at(i) / q).epsilon(1e-12));
  }
  CHECK(kept > 60);
  CHECK(kept < 180);
}

TEST_CASE("dropout backward routes gradients through the kept mask") {
  Rng rng(29);
  auto x = random_tensor<double>({40}, rng, 0.5, 1.5);
  Rng drop_rng(7);
  Tape<double> tape;
  auto y = dropout(&tape, x, 0.5, drop_rng, true);
  auto loss = sum_all(&tape, y);
  tape.backward(loss);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool kept = y.at(i) != 0.0;
    CHECK(x.grad()[i] == doctest::Approx(kept ? 2.0 : 0.0));
  }
}

TEST_CASE_TEMPLATE("every primitive passes a finite difference check", T, float, double) {
  const double step = std::is_same_v<T, float> ? 1e-2 : 1e-5;
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-6;
  const double floor = std::is_same_v<T, float> ? 1.0 : 1e-2;
  Rng rng(31);

  auto check = [&](const char* what, auto&& make_loss,
                   std::vector<std::pair<std::string, Tensor<T>>> params) {
    INFO(what);
    const double err = grad_check<T>(make_loss, params, step, floor);
    CHECK(err < tol);
  };

  {
    auto a = random_tensor<T>({3, 4}, rng);
    auto b = random_tensor<T>({4, 5}, rng);
    check("matmul", [&](Tape<T>* t) { return mix_to_scalar(t, matmul(t, a, b)); },
          {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor<T>({3, 4}, rng);
    auto b = random_tensor<T>({5, 4}, rng);
    check("matmul-nt",
          [&](Tape<T>* t) { return mix_to_scalar(t, matmul(t, a, b, false, true)); },
          {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor<T>({4, 3}, rng);
    auto b = random_tensor<T>({4, 5}, rng);
    check("matmul-tn",
          [&](Tape<T>* t) { return mix_to_scalar(t, matmul(t, a, b, true, false)); },
          {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor<T>({4, 6}, rng);
    auto row = random_tensor<T>({6}, rng);
    auto col = random_tensor<T>({4, 1}, rng);
    auto s = random_tensor<T>({1}, rng);
    check("add-broadcast",
          [&](Tape<T>* t) {
            return mix_to_scalar(t, add(t, mul(t, add(t, a, row), col), s));
          },
          {{"a", a}, {"row", row}, {"col", col}, {"s", s}});
  }
  {
    auto a = random_tensor<T>({3, 5}, rng);
    auto b = random_tensor<T>({3, 5}, rng);
    check("sub-mul",
          [&](Tape<T>* t) { return mix_to_scalar(t, mul(t, sub(t, a, b), b)); },
          {{"a", a}, {"b", b}});
  }
  {
    auto a = random_tensor<T>({2, 3}, rng);
    auto b = random_tensor<T>({2, 4}, rng);
    auto c = random_tensor<T>({1, 7}, rng);
    check("concat",
          [&](Tape<T>* t) {
            auto wide = concat<T>(t, {a, b}, 1);
            auto tall = concat<T>(t, {wide, c}, 0);
            return mix_to_scalar(t, tall);
          },
          {{"a", a}, {"b", b}, {"c", c}});
  }
  {
    auto a = random_tensor<T>({3, 8}, rng);
    check("slice-cols",
          [&](Tape<T>* t) { return mix_to_scalar(t, slice_cols(t, a, 2, 4)); },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({4, 4}, rng, 0.2, 1.8);
    check("unary-chain",
          [&](Tape<T>* t) {
            auto y = relu(t, sub(t, a, Tensor<T>::scalar(T(0.1))));
            y = tanh_op(t, y);
            y = sigmoid(t, y);
            y = exp_op(t, y);
            y = log_op(t, y);
            return mix_to_scalar(t, y);
          },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({6}, rng, 0.5, 2.0);
    check("rsqrt", [&](Tape<T>* t) { return mix_to_scalar(t, rsqrt(t, a, T(1e-5))); },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({6}, rng, 0.5, 2.0);
    check("clamp-min",
          [&](Tape<T>* t) { return mix_to_scalar(t, clamp_min(t, a, T(0.1))); },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({3, 6}, rng, -2.0, 2.0);
    check("softmax", [&](Tape<T>* t) { return mix_to_scalar(t, softmax(t, a)); },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({5, 3}, rng);
    auto ids = make_ids({0, 1, 0, 2, 1});
    check("segment-sum",
          [&](Tape<T>* t) { return mix_to_scalar(t, segment_sum(t, a, ids, 3)); },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({6, 1}, rng, -2.0, 2.0);
    auto ids = make_ids({0, 0, 1, 1, 1, 2});
    check("segment-softmax",
          [&](Tape<T>* t) { return mix_to_scalar(t, segment_softmax(t, a, ids, 3)); },
          {{"a", a}});
  }
  {
    auto table = random_tensor<T>({7, 4}, rng);
    auto ids = make_ids({2, 2, 6, 0});
    check("embedding-lookup",
          [&](Tape<T>* t) { return mix_to_scalar(t, embedding_lookup(t, table, ids)); },
          {{"table", table}});
  }
  {
    auto x = random_tensor<T>({4, 6}, rng);
    auto gamma = random_tensor<T>({6}, rng, 0.5, 1.5);
    auto beta = random_tensor<T>({6}, rng);
    check("layer-norm",
          [&](Tape<T>* t) {
            return mix_to_scalar(t, layer_norm(t, x, gamma, beta, T(1e-5)));
          },
          {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  }
  {
    auto a = random_tensor<T>({4, 5}, rng);
    check("sum-axes",
          [&](Tape<T>* t) {
            auto rows = sum_axis(t, a, 1);
            auto cols = sum_axis(t, a, 0);
            return add(t, sum_all(t, rows), sum_all(t, mul(t, cols, cols)));
          },
          {{"a", a}});
  }
  {
    auto a = random_tensor<T>({4, 5}, rng);
    auto ids = make_ids({1, 0, 4, 2});
    check("pick", [&](Tape<T>* t) { return mix_to_scalar(t, pick(t, a, ids)); },
          {{"a", a}});
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  auto p = Tensor<double>::from({3}, {1.0, -2.0, 3.0}, true);
  p.zero_grad();
  std::vector<Tensor<double>> params = {p};
  AdamState<double> st;
  st.init(params);
  adam_step<double>(params, st);
  CHECK(p.at(0) == doctest::Approx(1.0));
  CHECK(p.at(1) == doctest::Approx(-2.0));
  CHECK(p.at(2) == doctest::Approx(3.0));
  CHECK(st.t == 1);
}

TEST_CASE("adam first step moves by about minus lr times the gradient sign") {
  auto p = Tensor<double>::scalar(0.0, true);
  p.zero_grad();
  p.grad()[0] = 0.5;
  std::vector<Tensor<double>> params = {p};
  AdamState<double> st;
  st.lr = 5e-4;
  st.init(params);
  adam_step<double>(params, st);
  CHECK(p.item() == doctest::Approx(-5e-4).epsilon(1e-7));
  CHECK(p.grad()[0] == doctest::Approx(0.5));  // grads untouched
}

TEST_CASE("adam second identical step is no larger than the first") {
  auto p = Tensor<double>::scalar(0.0, true);
  std::vector<Tensor<double>> params = {p};
  AdamState<double> st;
  st.init(params);
  p.zero_grad();
  p.grad()[0] = 0.3;
  adam_step<double>(params, st);
  const double d1 = std::abs(p.item());
  const double before = p.item();
  p.zero_grad();
  p.grad()[0] = 0.3;
  adam_step<double>(params, st);
  const double d2 = std::abs(p.item() - before);
  CHECK(d2 <= d1 + 1e-12);
  CHECK(st.t == 2);
}

TEST_CASE("adam requires populated gradients") {
  auto p = Tensor<double>::scalar(1.0, true);
  std::vector<Tensor<double>> params = {p};
  AdamState<double> st;
  st.init(params);
  CHECK_THROWS_AS(adam_step<double>(params, st), ContractError);
}
