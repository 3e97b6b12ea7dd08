#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "lglab/pola.hpp"

using namespace lglab;
using namespace lglab::pola;

namespace {

AttentionMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  AttentionMatrix a(static_cast<int>(rows.size()));
  for (int i = 1; i <= a.n; ++i)
    for (int j = 1; j <= a.n; ++j) a.set(i, j, rows[i - 1][j - 1]);
  return a;
}

// Independent minimal-partition oracle: enumerate every partition of the
// nonzero support into blocks; a partition is feasible iff each block is
// value-constant. Exponential, fine for the tiny instances it is used on.
int lrc_partition_oracle(const AttentionMatrix& a) {
  std::vector<double> vals;
  for (int i = 1; i <= a.n; ++i)
    for (int j = i; j <= a.n; ++j)
      if (a.at(i, j) != 0.0) vals.push_back(a.at(i, j));
  if (vals.empty()) return 0;
  const int m = static_cast<int>(vals.size());
  std::vector<int> block(m, 0);
  int best = m;
  auto feasible = [&](int blocks) {
    for (int b = 0; b < blocks; ++b) {
      double ref = 0.0;
      bool seen = false;
      for (int k = 0; k < m; ++k) {
        if (block[k] != b) continue;
        if (!seen) {
          ref = vals[k];
          seen = true;
        } else if (vals[k] != ref) {
          return false;
        }
      }
    }
    return true;
  };
  // Restricted-growth strings enumerate set partitions exactly once.
  std::function<void(int, int)> rec = [&](int k, int maxb) {
    if (k == m) {
      if (feasible(maxb)) best = std::min(best, maxb);
      return;
    }
    for (int b = 0; b <= maxb && b < best; ++b) {
      block[k] = b;
      rec(k + 1, std::max(maxb, b + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("pola_forward evaluates x^T A e_n") {
  AttentionMatrix zero(4);
  std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  CHECK(pola_forward(x, 2, zero) == 0.0);

  AttentionMatrix e11(3);
  e11.set(1, 1, 1.0);
  CHECK(pola_forward({1.0, 0.0, 0.0}, 1, e11) == 1.0);

  AttentionMatrix a(3);
  a.set(1, 2, 2.0);
  a.set(2, 2, 3.0);
  CHECK(pola_forward({1.0, 2.0, 3.0}, 2, a) == 8.0);

  CHECK_THROWS_AS(pola_forward({1.0, 2.0}, 1, a), std::invalid_argument);
  CHECK_THROWS_AS(pola_forward({1.0, 2.0, 3.0}, 4, a), std::out_of_range);
}

TEST_CASE("pola_forward is linear") {
  Rng rng(5);
  AttentionMatrix a(6);
  for (int i = 1; i <= 6; ++i)
    for (int j = i; j <= 6; ++j) a.set(i, j, rng.uniform(-2.0, 2.0));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6), y(6), z(6);
    for (int i = 0; i < 6; ++i) {
      x[i] = rng.uniform(-1.0, 1.0);
      y[i] = rng.uniform(-1.0, 1.0);
    }
    const double alpha = rng.uniform(-2.0, 2.0), beta = rng.uniform(-2.0, 2.0);
    for (int i = 0; i < 6; ++i) z[i] = alpha * x[i] + beta * y[i];
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    CHECK(pola_forward(z, n, a) ==
          doctest::Approx(alpha * pola_forward(x, n, a) + beta * pola_forward(y, n, a))
              .epsilon(1e-12));
  }
}

TEST_CASE("prf_to_indicators: rpe gives diagonal masks, ape singletons, constant one class") {
  const auto rpe = standard_prf(StandardPe::rpe, 3);
  auto ind = prf_to_indicators(rpe, 3);
  CHECK(ind.s_max == 3);
  // Cells on the same upper diagonal share a class.
  CHECK(ind.cls(1, 1) == ind.cls(2, 2));
  CHECK(ind.cls(1, 1) == ind.cls(3, 3));
  CHECK(ind.cls(1, 2) == ind.cls(2, 3));
  CHECK(ind.cls(1, 2) != ind.cls(1, 1));
  CHECK(ind.cls(1, 3) != ind.cls(1, 2));

  const auto ape = standard_prf(StandardPe::ape, 3);
  auto ind_ape = prf_to_indicators(ape, 3);
  CHECK(ind_ape.s_max == 6);  // every upper-triangular cell its own mask

  auto ind_const = prf_to_indicators(constant_prf(1), 4);
  CHECK(ind_const.s_max == 1);
  AttentionMatrix mask = ind_const.mask(1);
  for (int i = 1; i <= 4; ++i)
    for (int j = i; j <= 4; ++j) CHECK(mask.at(i, j) == 1.0);
}

TEST_CASE("lrc_of_matrix: examples and partition-oracle equivalence") {
  CHECK(lrc_of_matrix(AttentionMatrix(4)) == 0);

  auto a = from_rows({{2, 2, 0}, {0, 0, 5}, {0, 0, 0}});
  CHECK(lrc_of_matrix(a) == 2);
  CHECK(lrc_partition_oracle(a) == 2);

  AttentionMatrix eye(5);
  for (int i = 1; i <= 5; ++i) eye.set(i, i, 1.0);
  CHECK(lrc_of_matrix(eye) == 1);
  CHECK(lrc_partition_oracle(eye) == 1);

  // Full sweep over N=2 matrices with entries in {0,1,2,3}; the N=3 sweep
  // runs in the acceptance suite.
  for (int e0 = 0; e0 < 4; ++e0)
    for (int e1 = 0; e1 < 4; ++e1)
      for (int e2 = 0; e2 < 4; ++e2) {
        AttentionMatrix m(2);
        m.set(1, 1, e0);
        m.set(1, 2, e1);
        m.set(2, 2, e2);
        CHECK(lrc_of_matrix(m) == lrc_partition_oracle(m));
      }
}

TEST_CASE("lrc_of_prefix_function counts distinct values in observed columns") {
  CHECK(lrc_of_prefix_function(AttentionMatrix(4), 2) == 0);

  // {1,1} within columns <= 2; value 7 appears only later: a witness of
  // increasing complexity.
  auto a = from_rows({{1.0, 1.0, 0.0}, {0.0, 0.0, 7.0}, {0.0, 0.0, 0.0}});
  CHECK(lrc_of_prefix_function(a, 2) == 1);
  CHECK(lrc_of_matrix(a) == 2);

  // Toeplitz: constant along diagonals, all values visible in the prefix.
  auto t = from_rows({{4.0, 9.0, 2.0}, {0.0, 4.0, 9.0}, {0.0, 0.0, 4.0}});
  CHECK(lrc_of_prefix_function(t, 2) == 2);
  CHECK(lrc_of_matrix(t) == 3);
  auto t2 = from_rows({{4.0, 9.0}, {0.0, 4.0}});
  CHECK(lrc_of_prefix_function(t2, 2) == lrc_of_matrix(t2));
}

TEST_CASE("theorem2_prf builds one class per value plus a catch-all") {
  // Constant upper triangle: a single class, catch-all unused.
  AttentionMatrix c(4);
  for (int i = 1; i <= 4; ++i)
    for (int j = i; j <= 4; ++j) c.set(i, j, 2.5);
  auto prf = theorem2_prf(c, 2);
  CHECK(prf.s_max == 2);
  for (int q = 0; q < 4; ++q)
    for (int k = 0; k <= q; ++k) CHECK(prf(q, k) == 1);

  // Toeplitz target: classes coincide with occupied diagonals.
  auto t = from_rows({{4.0, 9.0, 0.0}, {0.0, 4.0, 9.0}, {0.0, 0.0, 4.0}});
  auto tp = theorem2_prf(t, 2);
  CHECK(tp(0, 0) == tp(1, 1));
  CHECK(tp(1, 0) == tp(2, 1));
  CHECK(tp(0, 0) != tp(1, 0));
  CHECK(tp(2, 0) == tp.s_max);  // zero cell lands in the catch-all

  // A value appearing only outside the observable block is Theorem-1
  // territory.
  auto bad = from_rows({{1.0, 1.0, 0.0}, {0.0, 0.0, 7.0}, {0.0, 0.0, 0.0}});
  CHECK_THROWS_AS(theorem2_prf(bad, 2), IncreasingLrcError);
}

TEST_CASE("min_norm_solution fills observed classes and zeroes the rest") {
  // One observed class (value 4) plus a catch-all observed only outside.
  AttentionMatrix a(3);
  a.set(1, 1, 4.0);
  a.set(1, 2, 4.0);
  a.set(2, 2, 4.0);
  auto prf = theorem2_prf(a, 2);
  auto ind = prf_to_indicators(prf, 3);
  auto q = min_norm_solution(a, 2, ind);
  REQUIRE(q.q.size() == 2);
  CHECK(q.q[0] == 4.0);
  CHECK(q.q[1] == 0.0);

  // Nothing observed at all: zero is the least-norm interpolator.
  auto q0 = min_norm_solution(a, 0, ind);
  CHECK(q0.q == std::vector<double>{0.0, 0.0});

  // A class holding both 1 and 2 cannot interpolate.
  AttentionMatrix b(2);
  b.set(1, 1, 1.0);
  b.set(1, 2, 2.0);
  b.set(2, 2, 1.0);
  auto merged = prf_to_indicators(constant_prf(1), 2);
  CHECK_THROWS_AS(min_norm_solution(b, 2, merged), InconsistentClassError);
}

TEST_CASE("train_pola_gd: converges to the closed form, zero stays zero, diverges on huge lr") {
  Rng rng(21);
  auto a = random_target(rng, 8, 4, 3, false);
  auto prf = theorem2_prf(a, 4);
  auto ind = prf_to_indicators(prf, 8);
  auto data = basis_dataset(a, 4);

  auto q_gd = train_pola_gd(data, ind);
  auto q_mn = min_norm_solution(a, 4, ind);
  REQUIRE(q_gd.q.size() == q_mn.q.size());
  for (std::size_t s = 0; s < q_gd.q.size(); ++s)
    CHECK(std::abs(q_gd.q[s] - q_mn.q[s]) <= 1e-6);

  // Zero target: zero gradient everywhere.
  AttentionMatrix zero(8);
  auto zdata = basis_dataset(zero, 4);
  auto qz = train_pola_gd(zdata, ind);
  for (double v : qz.q) CHECK(v == 0.0);

  // lr far above 2/lambda_max of the (diagonal) Gram matrix blows up; its
  // largest eigenvalue is the largest observed class count, well under 40.
  GdOptions opt;
  opt.lr = 1000.0;
  CHECK_THROWS_AS(train_pola_gd(data, ind, opt), DivergedError);
}

TEST_CASE("verify_lg: reproduction succeeds, zero params fail with witness") {
  Rng rng(33);
  auto a = random_target(rng, 10, 5, 3, false);
  auto prf = theorem2_prf(a, 5);
  auto ind = prf_to_indicators(prf, 10);
  auto q = min_norm_solution(a, 5, ind);
  auto rep = verify_lg(q, ind, a, 10, 1e-8);
  CHECK(rep.exact);
  CHECK(!rep.witness.has_value());

  PolaParams qzero;
  qzero.q.assign(ind.s_max, 0.0);
  auto bad = verify_lg(qzero, ind, a, 10, 1e-8);
  CHECK(!bad.exact);
  REQUIRE(bad.witness.has_value());
  auto [wi, wn] = *bad.witness;
  CHECK(a.at(wi, wn) != 0.0);
}

TEST_CASE("reparameterization round-trip bounds the LRC") {
  Rng rng(44);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 5;
    auto prf = standard_prf(StandardPe::rpe, n);
    auto ind = prf_to_indicators(prf, n);
    PolaParams q;
    q.q.resize(ind.s_max);
    std::vector<double> palette{0.0, 1.5, -2.0, 3.0, 0.5};
    std::vector<bool> used(palette.size(), false);
    for (auto& v : q.q) {
      const int pick = static_cast<int>(rng.uniform_int(0, 4));
      v = palette[pick];
      used[pick] = true;
    }
    int distinct_nonzero = 0;
    for (std::size_t k = 1; k < palette.size(); ++k)
      if (used[k]) ++distinct_nonzero;
    AttentionMatrix m(n);
    for (int i = 1; i <= n; ++i)
      for (int j = i; j <= n; ++j) m.set(i, j, q.q[ind.cls(i, j) - 1]);
    CHECK(lrc_of_matrix(m) <= distinct_nonzero);
  }
}

TEST_CASE("theorem-2 pipeline end to end on random targets, theorem-1 failures witnessed") {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_target(rng, 12, 6, 2 + trial % 3, false);
    auto prf = theorem2_prf(a, 6);
    auto ind = prf_to_indicators(prf, 12);
    auto q = min_norm_solution(a, 6, ind);
    CHECK(verify_lg(q, ind, a, 12, 1e-8).exact);
  }
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_target(rng, 12, 6, 2 + trial % 3, true);
    CHECK_THROWS_AS(theorem2_prf(a, 6), IncreasingLrcError);
    // Even the omniscient class PE fails: the class of the planted value has
    // no observation inside the prefix, so training leaves it at zero.
    auto prf = value_class_prf(a);
    auto ind = prf_to_indicators(prf, 12);
    auto q = min_norm_solution(a, 6, ind);
    auto rep = verify_lg(q, ind, a, 12, 1e-8);
    CHECK(!rep.exact);
    REQUIRE(rep.witness.has_value());
    CHECK(rep.witness->second > 6);
  }
}

TEST_CASE("attention matrix json round-trip") {
  Rng rng(66);
  auto a = random_target(rng, 7, 3, 2, false);
  auto b = AttentionMatrix::from_json(a.to_json());
  CHECK(b.n == a.n);
  CHECK(b.e == a.e);
  PolaParams p{{1.0, -2.0, 0.25}};
  auto p2 = params_from_json(params_to_json(p));
  CHECK(p2.q == p.q);
}
