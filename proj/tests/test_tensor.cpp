#include <catch2/catch_amalgamated.hpp>

#include "fd_util.hpp"
#include "hmfnet/rng.hpp"
#include "hmfnet/tensor.hpp"

using namespace hmfnet;
using namespace hmfnet::ops;
using Catch::Approx;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Xoshiro256 &rng,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double &v : t.data)
    v = rng.uniform(lo, hi);
  return t;
}

} // namespace

TEST_CASE("matmul against hand arithmetic") {
  Tape tape;
  Var a = tape.leaf(Tensor::from_rows({{1, 2}, {3, 4}}));
  Var identity = tape.leaf(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var ai = matmul(a, identity);
  CHECK(ai.val().at(0, 0) == 1.0);
  CHECK(ai.val().at(0, 1) == 2.0);
  CHECK(ai.val().at(1, 0) == 3.0);
  CHECK(ai.val().at(1, 1) == 4.0);

  Var ones = tape.leaf(Tensor::from_rows({{1}, {1}}));
  Var prod = matmul(a, ones);
  CHECK(prod.val().at(0, 0) == 3.0);
  CHECK(prod.val().at(1, 0) == 7.0);

  Var bad = tape.leaf(Tensor::matrix(3, 3, 1.0));
  CHECK_THROWS_AS(matmul(a, bad), ShapeMismatch);
}

TEST_CASE("gradient of sum(A*B) w.r.t. A is ones*B^T") {
  Xoshiro256 rng(11);
  Tensor a0 = random_tensor({3, 4}, rng);
  Tensor b0 = random_tensor({4, 2}, rng);

  Tape tape;
  Var a = tape.leaf(a0);
  Var b = tape.leaf(b0);
  Var loss = sum_all(matmul(a, b));
  tape.backward(loss);

  // Closed form: (ones[3x2] B^T)_{ij} = sum_k B_{jk}.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 2; ++k)
        expect += b0.at(j, k);
      CHECK(tape.grad(a.id).at(i, j) == Approx(expect).margin(1e-12));
    }

  auto value_of = [&](const Tensor &probe) {
    Tape t2;
    Var a2 = t2.leaf(probe);
    Var b2 = t2.leaf(b0);
    return sum_all(matmul(a2, b2)).val().item();
  };
  auto stats = testutil::fd_compare(a0, value_of, tape.grad(a.id));
  CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("layer_norm forward examples") {
  Tape tape;
  Var gamma = tape.leaf(Tensor::vector({1, 1}));
  Var beta = tape.leaf(Tensor::vector({0, 0}));

  Var x = tape.leaf(Tensor::from_rows({{1, 3}}));
  Var y = layer_norm(x, gamma, beta, 0.0);
  CHECK(y.val().at(0, 0) == Approx(-1.0).margin(1e-12));
  CHECK(y.val().at(0, 1) == Approx(1.0).margin(1e-12));

  Var c = tape.leaf(Tensor::from_rows({{5, 5}}));
  Var yc = layer_norm(c, gamma, beta, 1e-5);
  CHECK(yc.val().at(0, 0) == Approx(0.0).margin(1e-12));
  CHECK(yc.val().at(0, 1) == Approx(0.0).margin(1e-12));
}

TEST_CASE("layer_norm gradient matches finite differences") {
  Xoshiro256 rng(21);
  Tensor x0 = random_tensor({4, 6}, rng);
  Tensor g0 = random_tensor({6}, rng, 0.5, 1.5);
  Tensor b0 = random_tensor({6}, rng);
  Tensor w = random_tensor({4, 6}, rng);  // fixed mixing weights

  Tape tape;
  Var x = tape.leaf(x0);
  Var gamma = tape.leaf(g0);
  Var beta = tape.leaf(b0);
  Var loss = sum_all(cmul(layer_norm(x, gamma, beta, 1e-5), w));
  tape.backward(loss);

  auto value_x = [&](const Tensor &probe) {
    Tape t;
    return sum_all(cmul(layer_norm(t.leaf(probe), t.leaf(g0), t.leaf(b0), 1e-5), w))
        .val()
        .item();
  };
  auto sx = testutil::fd_compare(x0, value_x, tape.grad(x.id));
  CHECK(sx.max_rel_err < 1e-4);

  auto value_g = [&](const Tensor &probe) {
    Tape t;
    return sum_all(cmul(layer_norm(t.leaf(x0), t.leaf(probe), t.leaf(b0), 1e-5), w))
        .val()
        .item();
  };
  auto sg = testutil::fd_compare(g0, value_g, tape.grad(gamma.id));
  CHECK(sg.max_rel_err < 1e-4);

  auto value_b = [&](const Tensor &probe) {
    Tape t;
    return sum_all(cmul(layer_norm(t.leaf(x0), t.leaf(g0), t.leaf(probe), 1e-5), w))
        .val()
        .item();
  };
  auto sb = testutil::fd_compare(b0, value_b, tape.grad(beta.id));
  CHECK(sb.max_rel_err < 1e-4);
}

TEST_CASE("elementwise activations") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0.0}));
  CHECK(sigmoid(x).val().data[0] == Approx(0.5));
  CHECK(cos_op(x).val().data[0] == Approx(1.0));
  CHECK(sin_op(x).val().data[0] == Approx(0.0));

  // d sigmoid / dx at 0 is exactly 0.25.
  Tape t2;
  Var x2 = t2.leaf(Tensor::vector({0.0}));
  Var loss = sum_all(sigmoid(x2));
  t2.backward(loss);
  CHECK(t2.grad(x2.id).data[0] == Approx(0.25).margin(1e-12));

  auto value_of = [](const Tensor &probe) {
    Tape t;
    return sum_all(sigmoid(t.leaf(probe))).val().item();
  };
  auto stats = testutil::fd_compare(Tensor::vector({0.0}), value_of,
                                    t2.grad(x2.id));
  CHECK(stats.max_rel_err < 1e-4);

  Tape t3;
  Var a = t3.leaf(Tensor::vector({1, 2}));
  Var b = t3.leaf(Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(mul(a, b), ShapeMismatch);
}

TEST_CASE("backward basics") {
  SECTION("loss = sum(x) gives ones") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1, 2, 3}));
    Var loss = sum_all(x);
    tape.backward(loss);
    for (double v : tape.grad(x.id).data)
      CHECK(v == 1.0);
  }
  SECTION("loss = sum(x*x) gives 2x") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1, -2, 3}));
    Var loss = sum_all(mul(x, x));
    tape.backward(loss);
    CHECK(tape.grad(x.id).data[0] == Approx(2.0));
    CHECK(tape.grad(x.id).data[1] == Approx(-4.0));
    CHECK(tape.grad(x.id).data[2] == Approx(6.0));
  }
  SECTION("non-scalar loss is rejected") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(tape.backward(x), NotScalar);
  }
  SECTION("untouched leaves get zero grad") {
    Tape tape;
    Var x = tape.leaf(Tensor::vector({1.0}));
    Var y = tape.leaf(Tensor::vector({2.0}));
    Var loss = sum_all(x);
    tape.backward(loss);
    CHECK(tape.grad(y.id).data[0] == 0.0);
  }
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Xoshiro256 rng(5);
  Tensor x0 = random_tensor({7, 9}, rng, -8.0, 8.0);
  Tape tape;
  Var y = softmax_rows(tape.leaf(x0));
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(y.val().at(i, j) > 0.0);
      s += y.val().at(i, j);
    }
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  Xoshiro256 rng(6);
  Tensor x0 = random_tensor({3, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tape tape;
  Var x = tape.leaf(x0);
  Var loss = sum_all(cmul(softmax_rows(x), w));
  tape.backward(loss);
  auto value_of = [&](const Tensor &probe) {
    Tape t;
    return sum_all(cmul(softmax_rows(t.leaf(probe)), w)).val().item();
  };
  auto stats = testutil::fd_compare(x0, value_of, tape.grad(x.id));
  CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("structural ops route gradients correctly") {
  Xoshiro256 rng(7);
  Tensor x0 = random_tensor({5, 4}, rng);

  SECTION("concat_cols + slice_cols") {
    Tensor w = random_tensor({5, 6}, rng);
    Tape tape;
    Var x = tape.leaf(x0);
    Var left = slice_cols(x, 0, 2);
    Var joined = concat_cols({left, x});
    Var loss = sum_all(cmul(joined, w));
    tape.backward(loss);
    auto value_of = [&](const Tensor &probe) {
      Tape t;
      Var p = t.leaf(probe);
      return sum_all(cmul(concat_cols({slice_cols(p, 0, 2), p}), w)).val().item();
    };
    auto stats = testutil::fd_compare(x0, value_of, tape.grad(x.id));
    CHECK(stats.max_rel_err < 1e-4);
  }

  SECTION("gather_rows accumulates duplicate indices") {
    std::vector<int> idx{0, 2, 2, 4};
    Tensor w = random_tensor({4, 4}, rng);
    Tape tape;
    Var x = tape.leaf(x0);
    Var loss = sum_all(cmul(gather_rows(x, idx), w));
    tape.backward(loss);
    auto value_of = [&](const Tensor &probe) {
      Tape t;
      return sum_all(cmul(gather_rows(t.leaf(probe), idx), w)).val().item();
    };
    auto stats = testutil::fd_compare(x0, value_of, tape.grad(x.id));
    CHECK(stats.max_rel_err < 1e-4);
  }

  SECTION("stack_rows") {
    Tensor r0 = random_tensor({4}, rng);
    Tensor r1 = random_tensor({4}, rng);
    Tensor w = random_tensor({2, 4}, rng);
    Tape tape;
    Var a = tape.leaf(r0);
    Var b = tape.leaf(r1);
    Var loss = sum_all(cmul(stack_rows({a, b}), w));
    tape.backward(loss);
    auto value_of = [&](const Tensor &probe) {
      Tape t;
      return sum_all(cmul(stack_rows({t.leaf(probe), t.leaf(r1)}), w))
          .val()
          .item();
    };
    auto stats = testutil::fd_compare(r0, value_of, tape.grad(a.id));
    CHECK(stats.max_rel_err < 1e-4);
  }
}

TEST_CASE("segment softmax and weighted sum") {
  // Two segments: {0,1,2} and {3,4}.
  std::vector<int> seg{0, 0, 0, 1, 1};
  Xoshiro256 rng(8);
  Tensor logits0 = random_tensor({5}, rng);
  Tensor rows0 = random_tensor({5, 3}, rng);
  Tensor w = random_tensor({2, 3}, rng);

  Tape tape;
  Var logits = tape.leaf(logits0);
  Var rows = tape.leaf(rows0);
  Var alpha = segment_softmax(logits, seg, 2);

  double s0 = alpha.val().data[0] + alpha.val().data[1] + alpha.val().data[2];
  double s1 = alpha.val().data[3] + alpha.val().data[4];
  CHECK(std::fabs(s0 - 1.0) < 1e-12);
  CHECK(std::fabs(s1 - 1.0) < 1e-12);

  Var pooled = segment_weighted_sum(alpha, rows, seg, 2);
  Var loss = sum_all(cmul(pooled, w));
  tape.backward(loss);

  auto value_logits = [&](const Tensor &probe) {
    Tape t;
    Var a = segment_softmax(t.leaf(probe), seg, 2);
    return sum_all(cmul(segment_weighted_sum(a, t.leaf(rows0), seg, 2), w))
        .val()
        .item();
  };
  auto st = testutil::fd_compare(logits0, value_logits, tape.grad(logits.id));
  CHECK(st.max_rel_err < 1e-4);

  auto value_rows = [&](const Tensor &probe) {
    Tape t;
    Var a = segment_softmax(t.leaf(logits0), seg, 2);
    return sum_all(cmul(segment_weighted_sum(a, t.leaf(probe), seg, 2), w))
        .val()
        .item();
  };
  auto sr = testutil::fd_compare(rows0, value_rows, tape.grad(rows.id));
  CHECK(sr.max_rel_err < 1e-4);
}

TEST_CASE("segment_mean forward and gradient") {
  Tape tape;
  Var x = tape.leaf(Tensor::from_rows({{1, 2}, {3, 4}}));
  Var pooled = segment_mean(x, {{0, 2}});
  CHECK(pooled.val().at(0, 0) == Approx(2.0));
  CHECK(pooled.val().at(0, 1) == Approx(3.0));

  Var single = segment_mean(x, {{0, 1}, {1, 2}});
  CHECK(single.val().at(0, 0) == 1.0);
  CHECK(single.val().at(1, 1) == 4.0);

  CHECK_THROWS_AS(segment_mean(x, {{1, 1}}), EmptySegment);

  // Gradient spreads 1/N to each member row.
  Var loss = sum_all(pooled);
  tape.backward(loss);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(tape.grad(x.id).at(i, j) == Approx(0.5));

  Xoshiro256 rng(9);
  Tensor x0 = random_tensor({6, 3}, rng);
  Tensor w = random_tensor({2, 3}, rng);
  std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, 4}, {4, 6}};
  Tape t2;
  Var x2 = t2.leaf(x0);
  Var loss2 = sum_all(cmul(segment_mean(x2, ranges), w));
  t2.backward(loss2);
  auto value_of = [&](const Tensor &probe) {
    Tape t;
    return sum_all(cmul(segment_mean(t.leaf(probe), ranges), w)).val().item();
  };
  auto stats = testutil::fd_compare(x0, value_of, t2.grad(x2.id));
  CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("misc op gradients: bias, scale_cols, clamp, log, transpose") {
  Xoshiro256 rng(10);
  Tensor x0 = random_tensor({4, 3}, rng, 0.2, 0.9);
  Tensor b0 = random_tensor({3}, rng);
  Tensor coeff = random_tensor({3}, rng, 0.5, 2.0);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor wt = random_tensor({3, 4}, rng);

  Tape tape;
  Var x = tape.leaf(x0);
  Var b = tape.leaf(b0);
  Var term1 = cmul(add_bias(x, b), w);
  Var term2 = cmul(scale_cols(x, coeff), w);
  Var term3 = cmul(log_op(clamp_op(x, 0.1, 0.95)), w);
  Var term4 = cmul(transpose(x), wt);
  Var loss = sum_all(
      add(add(sum_all(term1), sum_all(term2)),
          add(sum_all(term3), sum_all(term4))));
  tape.backward(loss);

  auto value_of = [&](const Tensor &probe) {
    Tape t;
    Var px = t.leaf(probe);
    Var pb = t.leaf(b0);
    Var t1 = cmul(add_bias(px, pb), w);
    Var t2 = cmul(scale_cols(px, coeff), w);
    Var t3 = cmul(log_op(clamp_op(px, 0.1, 0.95)), w);
    Var t4 = cmul(transpose(px), wt);
    return sum_all(add(add(sum_all(t1), sum_all(t2)),
                       add(sum_all(t3), sum_all(t4))))
        .val()
        .item();
  };
  auto stats = testutil::fd_compare(x0, value_of, tape.grad(x.id));
  CHECK(stats.max_rel_err < 1e-4);

  auto value_b = [&](const Tensor &probe) {
    Tape t;
    Var px = t.leaf(x0);
    Var pb = t.leaf(probe);
    Var t1 = cmul(add_bias(px, pb), w);
    Var t2 = cmul(scale_cols(px, coeff), w);
    Var t3 = cmul(log_op(clamp_op(px, 0.1, 0.95)), w);
    Var t4 = cmul(transpose(px), wt);
    return sum_all(add(add(sum_all(t1), sum_all(t2)),
                       add(sum_all(t3), sum_all(t4))))
        .val()
        .item();
  };
  auto sb = testutil::fd_compare(b0, value_b, tape.grad(b.id));
  CHECK(sb.max_rel_err < 1e-4);
}

TEST_CASE("row and column sums") {
  Tape tape;
  Var x = tape.leaf(Tensor::from_rows({{1, 2, 3}, {4, 5, 6}}));
  Var rs = row_sums(x);
  CHECK(rs.val().data[0] == 6.0);
  CHECK(rs.val().data[1] == 15.0);
  Var cs = col_sums(x);
  CHECK(cs.val().data[0] == 5.0);
  CHECK(cs.val().data[1] == 7.0);
  CHECK(cs.val().data[2] == 9.0);
}

TEST_CASE("xoshiro rng is deterministic and uniform-ish") {
  Xoshiro256 a(42), b(42);
  for (int i = 0; i < 100; ++i)
    REQUIRE(a.next() == b.next());
  Xoshiro256 c(43);
  double mean = 0;
  for (int i = 0; i < 10000; ++i)
    mean += c.uniform();
  mean /= 10000;
  CHECK(mean == Approx(0.5).margin(0.02));
}
