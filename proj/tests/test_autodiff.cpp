#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "fusionrec/adam.hpp"
#include "fusionrec/autodiff.hpp"
#include "fusionrec/checkpoint.hpp"
#include "fusionrec/grad_check.hpp"
#include "test_util.hpp"

using namespace fusionrec;
using namespace fusionrec::ad;
using testutil::max_abs_diff;
using testutil::random_matrix;

namespace {

constexpr double kTol = 1e-4;

// Projects an op output onto a fixed random weighting so every output entry matters.
Var<double> weighted_sum(Var<double> y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul_constant(y, random_matrix(y.rows(), y.cols(), rng)));
}

}  // namespace

TEST_CASE("matmul values and shape checks") {
  Tape<double> t;
  auto a = t.constant(Matrix<double>(2, 2, std::vector<double>{1, 2, 3, 4}));
  auto b = t.constant(Matrix<double>(2, 1, std::vector<double>{1, 1}));
  const auto c = matmul(a, b).value();
  CHECK(c(0, 0) == 3.0);
  CHECK(c(1, 0) == 7.0);
  auto x = t.constant(Matrix<double>(2, 3));
  CHECK_THROWS_AS(matmul(x, x), ShapeError);

  Rng rng(1);
  const auto xm = random_matrix(6, 4, rng, 100.0);
  auto id = t.constant(Matrix<double>::identity(6));
  CHECK(matmul(id, t.constant(xm)).value() == xm);  // bit-exact
}

TEST_CASE("softmax rows examples") {
  Tape<double> t;
  Matrix<double> x(3, 5);
  x(1, 4) = std::log(4.0);
  x(2, 0) = 1000.0;
  const auto s = softmax_rows(t.constant(x)).value();
  CHECK(s(0, 2) == doctest::Approx(0.2));
  CHECK(s(1, 0) == doctest::Approx(0.125));
  CHECK(s(1, 4) == doctest::Approx(0.5));
  CHECK(s(2, 0) == doctest::Approx(1.0));
  CHECK(s(2, 1) >= 0.0);
  Matrix<double> three(1, 3);
  const auto u = softmax_rows(t.constant(three)).value();
  CHECK(u(0, 0) == doctest::Approx(1.0 / 3.0));

  Matrix<double> bad(1, 2);
  bad(0, 1) = std::nan("");
  Tape<double> t2;
  CHECK_THROWS_AS(softmax_rows(t2.constant(bad)), NumericError);
}

TEST_CASE("elementwise and structural ops") {
  Tape<double> t;
  const auto r = relu(t.constant(Matrix<double>(1, 2, std::vector<double>{-1, 2}))).value();
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 2.0);

  auto gain = t.constant(Matrix<double>(1, 4, 1.0));
  auto bias = t.constant(Matrix<double>(1, 4));
  const auto ln = layer_norm(t.constant(Matrix<double>(2, 4, 3.5)), gain, bias).value();
  CHECK(ln.all_finite());
  for (const double v : ln.values()) CHECK(v == 0.0);

  auto a = t.constant(Matrix<double>(2, 3, 1.0));
  auto b = t.constant(Matrix<double>(2, 3, 2.0));
  const auto cc = concat_cols<double>({a, b}).value();
  CHECK(cc.rows() == 2);
  CHECK(cc.cols() == 6);
  CHECK(cc(1, 4) == 2.0);
  CHECK_THROWS_AS(add(a, t.constant(Matrix<double>(3, 2))), ShapeError);
  CHECK(scale(b, 0.5).value()(1, 2) == 1.0);
}

TEST_CASE("non-finite results are rejected") {
  Tape<double> t;
  auto big = t.constant(Matrix<double>(1, 1, 1e308));
  CHECK_THROWS_AS(scale(big, 10.0), NumericError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives all-ones") {
    Tape<double> t;
    auto x = t.variable(Matrix<double>(3, 2, 0.7));
    t.backward(sum(x));
    const auto gx = t.grad(x);
    for (const double g : gx.values()) CHECK(g == 1.0);
  }
  SUBCASE("sum of matmul: dA = 1 * B^T, checked against finite differences") {
    Rng rng(2);
    const auto b = random_matrix(4, 3, rng);
    Tape<double> t;
    auto a = t.variable(random_matrix(2, 4, rng));
    t.backward(sum(matmul(a, t.constant(b))));
    const auto ga = t.grad(a);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) row_sum += b(k, j);
        CHECK(ga(i, k) == doctest::Approx(row_sum).epsilon(1e-14));
      }
    }
    const double err = grad_check([&](Tape<double>& tt, Var<double> x) { return sum(matmul(x, tt.constant(b))); },
                                  random_matrix(2, 4, rng));
    CHECK(err < 1e-8);
  }
  SUBCASE("loss must be scalar; second backward throws") {
    Tape<double> t;
    auto x = t.variable(Matrix<double>(2, 2, 1.0));
    CHECK_THROWS_AS(t.backward(x), ShapeError);
    auto loss = sum(x);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
  }
  SUBCASE("untouched parameters get zero gradient") {
    Parameter<double> used("used", Matrix<double>(1, 2, 1.0));
    Parameter<double> unused("unused", Matrix<double>(1, 2, 1.0));
    Tape<double> t;
    auto u = t.parameter(used);
    auto v = t.parameter(unused);
    t.backward(sum(u));
    for (const double g : unused.grad.values()) CHECK(g == 0.0);
    const auto gv = t.grad(v);
    for (const double g : gv.values()) CHECK(g == 0.0);
    for (const double g : used.grad.values()) CHECK(g == 1.0);
  }
}

TEST_CASE("grad_check oracle behaviour") {
  Rng rng(3);
  const auto p = random_matrix(3, 4, rng);
  const double sq = grad_check([](Tape<double>&, Var<double> x) { return sum(mul(x, x)); }, p);
  CHECK(sq < 1e-6);
  const double lin = grad_check([](Tape<double>&, Var<double> x) { return sum(scale(x, 3.0)); }, p);
  CHECK(lin < 1e-9);
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  Rng rng(17);
  const auto p34 = random_matrix(3, 4, rng);
  const auto p43 = random_matrix(4, 3, rng);
  const auto row = random_matrix(1, 4, rng);
  auto check = [](const char* name, const ScalarFn& f, const Matrix<double>& at) {
    const double err = grad_check(f, at);
    INFO(name << " rel err " << err);
    CHECK(err < kTol);
  };
  check("matmul lhs", [&](Tape<double>& t, Var<double> x) { return weighted_sum(matmul(x, t.constant(p43)), 1); }, p34);
  check("matmul rhs", [&](Tape<double>& t, Var<double> x) { return weighted_sum(matmul(t.constant(p34), x), 2); }, p43);
  check("matmul_nt lhs", [&](Tape<double>& t, Var<double> x) { return weighted_sum(matmul_nt(x, t.constant(p34)), 3); }, p34);
  check("matmul_nt rhs", [&](Tape<double>& t, Var<double> x) { return weighted_sum(matmul_nt(t.constant(p34), x), 4); }, p34);
  check("transpose", [&](Tape<double>&, Var<double> x) { return weighted_sum(transpose(x), 5); }, p34);
  check("add", [&](Tape<double>& t, Var<double> x) { return weighted_sum(add(x, t.constant(p34)), 6); }, p34);
  check("add self", [&](Tape<double>&, Var<double> x) { return weighted_sum(add(x, x), 6); }, p34);
  check("mul", [&](Tape<double>& t, Var<double> x) { return weighted_sum(mul(x, t.constant(p34)), 7); }, p34);
  check("add_row matrix", [&](Tape<double>& t, Var<double> x) { return weighted_sum(add_row(x, t.constant(row)), 8); }, p34);
  check("add_row row", [&](Tape<double>& t, Var<double> x) { return weighted_sum(add_row(t.constant(p34), x), 9); }, row);
  check("scale", [&](Tape<double>&, Var<double> x) { return weighted_sum(scale(x, -1.7), 10); }, p34);
  check("relu", [&](Tape<double>&, Var<double> x) { return weighted_sum(relu(x), 11); }, p34);
  check("mul_constant", [&](Tape<double>&, Var<double> x) { return weighted_sum(mul_constant(x, p34), 12); }, p34);
  check("softmax_rows", [&](Tape<double>&, Var<double> x) { return weighted_sum(softmax_rows(x), 13); }, p34);
  check("layer_norm x", [&](Tape<double>& t, Var<double> x) {
    return weighted_sum(layer_norm(x, t.constant(row), t.constant(row)), 14);
  }, p34);
  check("layer_norm gain", [&](Tape<double>& t, Var<double> g) {
    return weighted_sum(layer_norm(t.constant(p34), g, t.constant(row)), 15);
  }, row);
  check("layer_norm bias", [&](Tape<double>& t, Var<double> b) {
    return weighted_sum(layer_norm(t.constant(p34), t.constant(row), b), 16);
  }, row);
  check("concat_cols", [&](Tape<double>& t, Var<double> x) {
    return weighted_sum(concat_cols<double>({x, t.constant(p34), x}), 17);
  }, p34);
  check("concat_rows", [&](Tape<double>& t, Var<double> x) {
    return weighted_sum(concat_rows<double>({t.constant(row), x, x}), 18);
  }, p34);
  check("slice_cols", [&](Tape<double>&, Var<double> x) { return weighted_sum(slice_cols(x, 1, 2), 19); }, p34);
  check("gather_rows", [&](Tape<double>&, Var<double> x) {
    return weighted_sum(gather_rows(x, {2, 0, 2, 1, 2}), 20);
  }, p34);
  check("sum", [&](Tape<double>&, Var<double> x) { return scale(sum(x), 2.5); }, p34);
  check("mean", [&](Tape<double>&, Var<double> x) { return scale(mean(x), 2.5); }, p34);
  check("nll", [&](Tape<double>&, Var<double> x) { return nll(softmax_rows(x), {0, 3, 1}); }, p34);

  const kernels::AttentionShape shape{2, 3, 2, 2};
  const auto q0 = random_matrix(6, 4, rng), k0 = random_matrix(6, 4, rng), v0 = random_matrix(6, 4, rng);
  Matrix<double> keep(shape.prob_rows(), shape.seq_len);
  for (auto& x : keep.values()) x = uniform01(rng) < 0.3 ? 0.0 : 1.0 / 0.7;
  const Matrix<double>* masks[] = {nullptr, &keep};
  for (const Matrix<double>* mask : masks) {
    check("attention q", [&](Tape<double>& t, Var<double> x) {
      return weighted_sum(attention(x, t.constant(k0), t.constant(v0), shape, mask), 21);
    }, q0);
    check("attention k", [&](Tape<double>& t, Var<double> x) {
      return weighted_sum(attention(t.constant(q0), x, t.constant(v0), shape, mask), 22);
    }, k0);
    check("attention v", [&](Tape<double>& t, Var<double> x) {
      return weighted_sum(attention(t.constant(q0), t.constant(k0), x, shape, mask), 23);
    }, v0);
  }
}

TEST_CASE("nll clamps zero probabilities") {
  Tape<double> t;
  Matrix<double> probs(2, 2);
  probs(0, 0) = 1.0;
  probs(1, 0) = 1.0;
  auto p = t.variable(probs);
  auto loss = nll(p, {0, 1});
  CHECK(loss.value()(0, 0) == doctest::Approx(-std::log(1e-12) / 2.0));
  t.backward(loss);
  CHECK(t.grad(p).all_finite());
}

TEST_CASE("fused attention equals the primitive composition") {
  Rng rng(8);
  const kernels::AttentionShape shape{2, 4, 2, 3};
  const auto q = random_matrix(8, 6, rng), k = random_matrix(8, 6, rng), v = random_matrix(8, 6, rng);
  Tape<double> t;
  const auto fused = attention(t.constant(q), t.constant(k), t.constant(v), shape).value();
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < 4; ++i) rows.push_back(b * 4 + i);
    for (std::size_t h = 0; h < 2; ++h) {
      auto qs = slice_cols(gather_rows(t.constant(q), rows), h * 3, 3);
      auto ks = slice_cols(gather_rows(t.constant(k), rows), h * 3, 3);
      auto vs = slice_cols(gather_rows(t.constant(v), rows), h * 3, 3);
      const auto out = matmul(softmax_rows(scale(matmul_nt(qs, ks), 1.0 / std::sqrt(3.0))), vs).value();
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(fused(b * 4 + i, h * 3 + j) == doctest::Approx(out(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam") {
  Rng rng(5);
  SUBCASE("zero gradient is the identity for any state") {
    Parameter<double> p("p", random_matrix(3, 3, rng));
    std::vector<Parameter<double>*> ps{&p};
    AdamState<double> st(ps, AdamConfig{.lr = 0.1});
    p.grad = random_matrix(3, 3, rng);
    adam_step<double>(ps, st);  // build up momentum
    const auto before = p.value;
    p.zero_grad();
    adam_step<double>(ps, st);
    CHECK(p.value == before);
  }
  SUBCASE("first step moves each entry by lr against the gradient sign") {
    Parameter<double> p("p", Matrix<double>(1, 4, 1.0));
    p.grad = Matrix<double>(1, 4, std::vector<double>{0.3, -2.0, 1e-3, -50.0});
    std::vector<Parameter<double>*> ps{&p};
    AdamState<double> st(ps, AdamConfig{.lr = 0.01});
    adam_step<double>(ps, st);
    // m_hat = g, v_hat = g^2  =>  step = lr * g / (|g| + eps)
    for (std::size_t j = 0; j < 4; ++j) {
      const double g = p.grad(0, j);
      CHECK(p.value(0, j) == doctest::Approx(1.0 - 0.01 * g / (std::abs(g) + 1e-8)).epsilon(1e-14));
    }
    CHECK(st.step == 1);
  }
  SUBCASE("lr 0 leaves parameters unchanged") {
    Parameter<double> p("p", random_matrix(2, 2, rng));
    p.grad = random_matrix(2, 2, rng);
    const auto before = p.value;
    std::vector<Parameter<double>*> ps{&p};
    AdamState<double> st(ps, AdamConfig{.lr = 0.0});
    adam_step<double>(ps, st);
    CHECK(p.value == before);
  }
  SUBCASE("errors") {
    Parameter<double> p("p", Matrix<double>(2, 2));
    std::vector<Parameter<double>*> ps{&p};
    AdamState<double> st(ps, AdamConfig{});
    p.grad(0, 0) = std::numeric_limits<double>::infinity();
    const auto before = p.value;
    CHECK_THROWS_AS(adam_step<double>(ps, st), NumericError);
    CHECK(p.value == before);
    Parameter<double> other("q", Matrix<double>(3, 1));
    std::vector<Parameter<double>*> wrong{&other};
    CHECK_THROWS_AS(adam_step<double>(wrong, st), ShapeError);
    AdamState<double> neg(ps, AdamConfig{.lr = -1.0});
    p.zero_grad();
    CHECK_THROWS(adam_step<double>(ps, neg));
  }
}

TEST_CASE("FRWT checkpoints") {
  testutil::TempDir dir;
  Rng rng(6);
  Parameter<double> a("layer.a", random_matrix(3, 2, rng));
  Parameter<double> b("layer.b", random_matrix(1, 5, rng));
  save_checkpoint<double>(dir / "m.frwt", {&a, &b});
  const auto records = read_checkpoint(dir / "m.frwt");
  REQUIRE(records.size() == 2);
  CHECK(records[0].name == "layer.a");
  CHECK(records[1].value.cols() == 5);

  Parameter<double> a2("layer.a", Matrix<double>(3, 2)), b2("layer.b", Matrix<double>(1, 5));
  load_checkpoint<double>(dir / "m.frwt", {&a2, &b2});
  CHECK(max_abs_diff(a.value, a2.value) < 1e-7);  // stored as f32
  for (std::size_t i = 0; i < a.value.size(); ++i) CHECK(a2.value.data()[i] == static_cast<double>(static_cast<float>(a.value.data()[i])));

  Parameter<double> wrong_shape("layer.b", Matrix<double>(5, 1));
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "m.frwt", {&a2, &wrong_shape}), DataError);
  Parameter<double> wrong_name("layer.c", Matrix<double>(1, 5));
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "m.frwt", {&a2, &wrong_name}), DataError);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "m.frwt", {&a2}), DataError);

  {
    std::ofstream out(dir / "bad.frwt", std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "bad.frwt"), doctest::Contains("magic"), DataError);
  {
    std::ofstream out(dir / "v2.frwt", std::ios::binary);
    const char bytes[] = {'F', 'R', 'W', 'T', 2, 0, 0, 0};
    out.write(bytes, sizeof bytes);
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "v2.frwt"), doctest::Contains("version"), DataError);
  {
    std::ifstream in(dir / "m.frwt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(dir / "short.frwt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "short.frwt"), DataError);
}
