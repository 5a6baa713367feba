#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "cwae/error.hpp"
#include "cwae/ops.hpp"
#include "cwae/optim.hpp"
#include "cwae/rng.hpp"
#include "test_util.hpp"

using namespace cwae;
using testing::central_diff;
using testing::rel_err;

namespace {

Tensor random_tensor(Rng& r, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = r.uniform(-scale, scale);
  return t;
}

double weighted_sum(const Tensor& a, const Tensor& w) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i];
  return s;
}

}  // namespace

TEST_CASE("embedding: gather") {
  Parameter table("t", Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
  const std::int32_t idx[] = {1, 0, 1};
  const Tensor out = embedding_forward(table, idx);
  CHECK(out == Tensor({3, 2}, std::vector<double>{3, 4, 1, 2, 3, 4}));
}

TEST_CASE("embedding: backward accumulates repeated rows") {
  Parameter table("t", Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
  const std::int32_t idx[] = {0, 0};
  embedding_backward(table, idx, Tensor({2, 2}, 1.0));
  CHECK(table.grad == Tensor({2, 2}, std::vector<double>{2, 2, 0, 0}));
}

TEST_CASE("embedding: finite differences") {
  Rng r(1);
  Parameter table("t", random_tensor(r, {5, 3}));
  const std::int32_t idx[] = {4, 0, 2, 2, 1, 4};
  const Tensor g = random_tensor(r, {6, 3});
  embedding_backward(table, idx, g);
  for (std::size_t i = 0; i < table.value.size(); ++i) {
    const double num = central_diff([&] { return weighted_sum(embedding_forward(table, idx), g); },
                                    table.value[i]);
    CHECK(rel_err(table.grad[i], num) < 1e-6);
  }
}

TEST_CASE("embedding: index out of range") {
  Parameter table("t", Tensor({2, 2}));
  const std::int32_t bad[] = {2};
  const std::int32_t neg[] = {-1};
  CHECK_THROWS_AS(embedding_forward(table, bad), ValidationError);
  CHECK_THROWS_AS(embedding_forward(table, neg), ValidationError);
}

TEST_CASE("affine: identity weight and zero input") {
  Rng r(2);
  const Tensor x = random_tensor(r, {4, 3});
  Parameter w("w", Tensor({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Parameter b("b", Tensor({3}, 0.0));
  CHECK(affine_forward(x, w, b) == x);

  Parameter b2("b", Tensor({3}, std::vector<double>{1, -2, 3}));
  const Tensor y = affine_forward(Tensor({2, 3}, 0.0), w, b2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(y(i, 0) == 1);
    CHECK(y(i, 1) == -2);
    CHECK(y(i, 2) == 3);
  }
}

TEST_CASE("affine: finite differences on x, W and b") {
  Rng r(3);
  Tensor x = random_tensor(r, {4, 3});
  Parameter w("w", random_tensor(r, {3, 5}));
  Parameter b("b", random_tensor(r, {5}));
  const Tensor g = random_tensor(r, {4, 5});
  const Tensor gx = affine_backward(x, w, b, g);
  auto f = [&] { return weighted_sum(affine_forward(x, w, b), g); };
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(rel_err(gx[i], central_diff(f, x[i])) < 1e-6);
  for (std::size_t i = 0; i < w.value.size(); ++i) CHECK(rel_err(w.grad[i], central_diff(f, w.value[i])) < 1e-6);
  for (std::size_t i = 0; i < b.value.size(); ++i) CHECK(rel_err(b.grad[i], central_diff(f, b.value[i])) < 1e-6);
}

TEST_CASE("affine: shape mismatch") {
  Parameter w("w", Tensor({3, 2}));
  Parameter b("b", Tensor({2}));
  Parameter bad_b("b", Tensor({3}));
  CHECK_THROWS_AS(affine_forward(Tensor({2, 4}), w, b), ValidationError);
  CHECK_THROWS_AS(affine_forward(Tensor({2, 3}), w, bad_b), ValidationError);
}

TEST_CASE("relu") {
  const Tensor x({1, 3}, std::vector<double>{-1, 0, 2});
  CHECK(relu_forward(x) == Tensor({1, 3}, std::vector<double>{0, 0, 2}));
  const Tensor g = relu_backward(x, Tensor({1, 3}, std::vector<double>{5, 5, 5}));
  CHECK(g == Tensor({1, 3}, std::vector<double>{0, 0, 5}));

  Rng r(4);
  Tensor y = random_tensor(r, {3, 4});
  for (auto& v : y.values()) v += v >= 0 ? 0.1 : -0.1;  // away from the kink
  const Tensor up = random_tensor(r, {3, 4});
  const Tensor gy = relu_backward(y, up);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double num = central_diff([&] { return weighted_sum(relu_forward(y), up); }, y[i]);
    CHECK(rel_err(gy[i], num) < 1e-6);
  }
}

TEST_CASE("softmax cross-entropy: closed forms") {
  const std::int32_t t0[] = {2};
  CHECK(softmax_cross_entropy(Tensor({1, 4}, 0.7), t0).loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  // log(1 + e^-20), computed independently
  const std::int32_t t1[] = {0};
  const double want = std::log1p(std::exp(-20.0));
  const auto ce = softmax_cross_entropy(Tensor({1, 2}, std::vector<double>{10, -10}), t1);
  CHECK(ce.loss == doctest::Approx(want).epsilon(1e-9));
  CHECK(ce.loss == doctest::Approx(2.06e-9).epsilon(0.01));
  // large logits stay finite
  const auto big = softmax_cross_entropy(Tensor({1, 2}, std::vector<double>{1000, -1000}), t1);
  CHECK(std::isfinite(big.loss));
}

TEST_CASE("softmax cross-entropy: finite differences and non-negativity") {
  Rng r(5);
  Tensor logits = random_tensor(r, {6, 4}, 3.0);
  const std::int32_t t[] = {0, 3, 1, 1, 2, 0};
  const auto ce = softmax_cross_entropy(logits, t);
  CHECK(ce.loss >= 0);
  for (double v : ce.per_row) CHECK(v >= 0);
  CHECK(std::accumulate(ce.per_row.begin(), ce.per_row.end(), 0.0) / 6 == doctest::Approx(ce.loss));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double num = central_diff([&] { return softmax_cross_entropy(logits, t).loss; }, logits[i]);
    CHECK(rel_err(ce.grad[i], num) < 1e-6);
  }
}

TEST_CASE("softmax cross-entropy: block form matches the plain form") {
  Rng r(6);
  const Tensor wide = random_tensor(r, {3, 7});
  const std::int32_t t[] = {1, 0, 2};
  const Tensor block = slice_cols(wide, 2, 3);
  const auto plain = softmax_cross_entropy(block, t);
  std::vector<double> per_row(3, 0.0);
  Tensor grad({3, 7}, 0.0);
  const double mean = softmax_cross_entropy_block(wide, 2, 3, t, per_row, &grad, 1.0 / 3);
  CHECK(mean == doctest::Approx(plain.loss).epsilon(1e-15));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(per_row[i] == doctest::Approx(plain.per_row[i]).epsilon(1e-15));
    CHECK(grad(i, 0) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(grad(i, 2 + j) == doctest::Approx(plain.grad(i, j)));
  }
}

TEST_CASE("softmax cross-entropy: target out of range") {
  const std::int32_t bad[] = {4};
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 4}), bad), ValidationError);
  const std::int32_t neg[] = {-1};
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 4}), neg), ValidationError);
}

TEST_CASE("mmd: identical samples and the singleton case") {
  Rng r(7);
  const Tensor z = random_tensor(r, {8, 3});
  CHECK(std::abs(rbf_mmd(z, z, 1.3).value) < 1e-12);
  const auto one = rbf_mmd(Tensor({1, 1}, 0.0), Tensor({1, 1}, 2.0), 1.0);
  // k(z,z) + k(p,p) - 2 k(z,p) = 2 - 2 exp(-4/2)
  CHECK(std::abs(one.value - (2 - 2 * std::exp(-2.0))) < 1e-12);
  CHECK(one.value == doctest::Approx(1.729329).epsilon(1e-6));
}

TEST_CASE("mmd: symmetric, permutation-invariant, non-negative") {
  Rng r(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + r.below(10), l = 1 + r.below(5);
    const Tensor z = random_tensor(r, {b, l}, 2.0), p = random_tensor(r, {b, l}, 2.0);
    const double s = 0.5 + r.uniform() * 2;
    const double m = rbf_mmd(z, p, s, false).value;
    CHECK(m >= 0);
    CHECK(rbf_mmd(p, z, s, false).value == doctest::Approx(m).epsilon(1e-12));
    // reverse the latent dimensions of both
    Tensor zr({b, l}), pr({b, l});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < l; ++j) {
        zr(i, j) = z(i, l - 1 - j);
        pr(i, j) = p(i, l - 1 - j);
      }
    CHECK(rbf_mmd(zr, pr, s, false).value == doctest::Approx(m).epsilon(1e-12));
  }
}

TEST_CASE("mmd: finite differences") {
  Rng r(9);
  Tensor z = random_tensor(r, {6, 3});
  const Tensor p = random_tensor(r, {6, 3});
  const auto m = rbf_mmd(z, p, 1.2);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double num = central_diff([&] { return rbf_mmd(z, p, 1.2, false).value; }, z[i]);
    CHECK(rel_err(m.grad_z[i], num) < 1e-5);
  }
}

TEST_CASE("mmd: errors and default sigma") {
  CHECK_THROWS_AS(rbf_mmd(Tensor({0, 2}), Tensor({0, 2}), 1.0), ValidationError);
  CHECK_THROWS_AS(rbf_mmd(Tensor({2, 2}), Tensor({2, 2}), 0.0), ValidationError);
  CHECK_THROWS_AS(rbf_mmd(Tensor({2, 2}), Tensor({3, 2}), 1.0), ValidationError);
  CHECK(default_mmd_sigma(32) == doctest::Approx(4.0));
}

TEST_CASE("forward ops are bitwise deterministic") {
  Rng r(10);
  const Tensor x = random_tensor(r, {5, 4});
  Parameter w("w", random_tensor(r, {4, 3}));
  Parameter b("b", random_tensor(r, {3}));
  CHECK(affine_forward(x, w, b) == affine_forward(x, w, b));
  const Tensor p = random_tensor(r, {5, 4});
  CHECK(rbf_mmd(x, p, 1.0).value == rbf_mmd(x, p, 1.0).value);
}

TEST_CASE("adam: zero gradient leaves parameters alone") {
  Parameter p("p", Tensor({3}, std::vector<double>{1, 2, 3}));
  Parameter* ps[] = {&p};
  AdamState st = AdamState::for_params(ps, {});
  adam_step(ps, st);
  CHECK(p.value == Tensor({3}, std::vector<double>{1, 2, 3}));
  CHECK(st.step_count == 1);
  adam_step(ps, st);
  CHECK(st.step_count == 2);
}

TEST_CASE("adam: first step moves by about lr against the gradient") {
  for (double g : {0.3, -7.0, 1e-3}) {
    Parameter p("p", Tensor({1}, 0.5));
    Parameter* ps[] = {&p};
    AdamState st = AdamState::for_params(ps, {});
    p.grad[0] = g;
    adam_step(ps, st);
    // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps)
    const double want = 0.5 - 1e-3 * g / (std::abs(g) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(p.grad[0] == 0.0);
  }
}

TEST_CASE("gradient_check: polynomial and constant") {
  Parameter t("theta", Tensor({1}, 3.0));
  Parameter* ps[] = {&t};
  const auto sq = gradient_check([&] { return t.value[0] * t.value[0]; },
                                 [&] { t.grad[0] = 2 * t.value[0]; }, ps);
  CHECK(sq.max_rel_error < 1e-9);
  CHECK(sq.coordinates == 1);
  const auto c = gradient_check([] { return 4.0; }, [] {}, ps);
  CHECK(c.max_rel_error == 0.0);
  CHECK(t.value[0] == 3.0);
}

TEST_CASE("gradient_check: wrong gradient is caught, non-finite loss throws") {
  Parameter t("theta", Tensor({2}, 1.0));
  Parameter* ps[] = {&t};
  const auto bad = gradient_check([&] { return t.value[0] * t.value[1]; },
                                  [&] { t.grad[0] = t.value[1]; t.grad[1] = 0.0; }, ps);
  CHECK(bad.max_rel_error > 0.5);
  CHECK(bad.worst_parameter == "theta");
  CHECK(bad.worst_index == 1);
  CHECK_THROWS_AS(gradient_check([] { return std::numeric_limits<double>::quiet_NaN(); }, [] {}, ps),
                  DivergenceError);
}

TEST_CASE("relative_error matches its definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 3.0) == doctest::Approx(0.5));
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(0.1));
}
