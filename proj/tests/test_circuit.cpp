#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <vector>

#include "doctest.h"
#include "lglab/circuit.hpp"
#include "lglab/rng.hpp"

using namespace lglab;
using namespace lglab::circ;
using tasks::TaskKind;

namespace {

// Prefix-xor reference.
std::vector<int> xor_prefix(const std::vector<int>& x) {
  std::vector<int> y;
  int acc = 0;
  for (int b : x) {
    acc ^= b;
    y.push_back(acc);
  }
  return y;
}

// Multiplier x1 times the reversed-digit number x_n..x_2, digits out least
// significant first, padded to n digits.
std::vector<int> mul_reference(const std::vector<int>& x) {
  const int n = static_cast<int>(x.size());
  long long value = 0;
  for (int k = n - 1; k >= 1; --k) value = value * 10 + x[k];
  long long prod = value * x[0];
  std::vector<int> y(n, 0);
  for (int k = 0; k < n; ++k) {
    y[k] = static_cast<int>(prod % 10);
    prod /= 10;
  }
  return y;
}

}  // namespace

TEST_CASE("parity circuit structure and evaluation") {
  auto fam = builtin_family(BuiltinKind::parity, 8);
  const auto& c3 = fam.members.at(3);
  REQUIRE(c3.steps.size() == 3);
  CHECK(c3.steps[0].position == 4);
  CHECK(fam.ops[c3.steps[0].op].id == "id");
  CHECK(c3.steps[0].parents == std::vector<int>{1});
  CHECK(c3.steps[1].position == 5);
  CHECK(fam.ops[c3.steps[1].op].id == "xor");
  CHECK(c3.steps[1].parents == std::vector<int>{2, 4});
  CHECK(c3.steps[2].parents == std::vector<int>{3, 5});

  CHECK(eval_circuit(fam, std::vector<int>{1, 0, 1}) == std::vector<int>{1, 1, 0});
  CHECK(eval_circuit(fam, std::vector<int>{0, 0, 0, 0}) == std::vector<int>{0, 0, 0, 0});

  // Exhaustive agreement with the prefix-xor reference.
  for (int n = 1; n <= 8; ++n) {
    for (int bits = 0; bits < (1 << n); ++bits) {
      std::vector<int> x(n);
      for (int k = 0; k < n; ++k) x[k] = (bits >> k) & 1;
      CHECK(eval_circuit(fam, x) == xor_prefix(x));
    }
  }
}

TEST_CASE("multiplication circuit matches the integer oracle") {
  auto fam = builtin_family(BuiltinKind::multiplication_1n, 10);
  CHECK(eval_circuit(fam, std::vector<int>{3, 4, 5}) == std::vector<int>{2, 6, 1});  // 3 * 54

  Rng rng(101);
  for (int n = 2; n <= 10; ++n) {
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<int> x(n);
      for (auto& d : x) d = static_cast<int>(rng.uniform_int(0, 9));
      const auto got = eval_circuit(fam, x);
      const auto want = mul_reference(x);
      REQUIRE_MESSAGE(got == want, "digit mismatch at n=", n);
    }
  }
}

TEST_CASE("example 3: two circuits, same function") {
  auto fa = builtin_family(BuiltinKind::example3_a, 8);
  auto fb = builtin_family(BuiltinKind::example3_b, 8);
  for (int n = 1; n <= 8; ++n) {
    for (int x1 = 0; x1 <= 9; ++x1) {
      std::vector<int> x(n, 0);
      x[0] = x1;
      const auto ya = eval_circuit_at(fa, n, x);
      const auto yb = eval_circuit_at(fb, n, x);
      CHECK(ya == yb);
      for (int k = 0; k < n; ++k) CHECK(ya[k] == (x1 + k + 1) % 10);
    }
  }
  // Distinct wiring for n >= 3, identical function regardless.
  bool differs = false;
  const auto& sa = fa.members.at(5).steps;
  const auto& sb = fb.members.at(5).steps;
  for (std::size_t k = 0; k < sa.size(); ++k)
    if (sa[k].op != sb[k].op || sa[k].parents != sb[k].parents) differs = true;
  CHECK(differs);
}

TEST_CASE("operator counts: src upper bounds and monotone extension") {
  CHECK(src_upper_bound(builtin_family(BuiltinKind::parity, 6)) == 2);
  CHECK(src_upper_bound(builtin_family(BuiltinKind::multiplication_1n, 6)) == 3);
  CHECK(src_upper_bound(builtin_family(BuiltinKind::example3_a, 6)) == 2);

  for (BuiltinKind kind : {BuiltinKind::parity, BuiltinKind::multiplication_1n,
                           BuiltinKind::example3_a, BuiltinKind::example3_b}) {
    int prev = 0;
    for (int n = 2; n <= 7; ++n) {
      const int cur = src_upper_bound(builtin_family(kind, n));
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("src brute force on tiny mappings") {
  auto identity = [](const std::vector<int>& x) { return x; };
  CHECK(src_bruteforce(identity, 2, 2, 2, 3) == 1);

  auto parity = [](const std::vector<int>& x) {
    std::vector<int> y;
    int acc = 0;
    for (int b : x) y.push_back(acc ^= b);
    return y;
  };
  CHECK(src_bruteforce(parity, 2, 2, 2, 3) == 2);

  auto constant = [](const std::vector<int>& x) { return std::vector<int>(x.size(), 0); };
  CHECK(src_bruteforce(constant, 2, 2, 2, 3) == 1);

  CHECK_THROWS_AS(src_bruteforce(identity, 4, 2, 2, 3), BoundsExceededError);
  CHECK_THROWS_AS(src_bruteforce(identity, 2, 5, 2, 3), BoundsExceededError);
}

TEST_CASE("characterization: aligned parity vs the PE zoo") {
  const int N = 10;
  auto fam = builtin_family(BuiltinKind::parity_aligned, N);

  // Offsets in data coordinates: the relation tables index query/key pairs
  // over positions 0 .. 2N, so size the generic PRFs accordingly.
  auto ipe = ipe_prf(TaskKind::parity, N);
  auto rep_ipe = check_prf_characterizes(ipe, fam, N);
  CHECK(rep_ipe.consistent);
  CHECK(rep_ipe.distinct);

  auto rpe = standard_prf(StandardPe::rpe, 2 * N + 2);
  auto rep_rpe = check_prf_characterizes(rpe, fam, N);
  CHECK(rep_rpe.consistent);
  CHECK(rep_rpe.distinct);

  auto ape = standard_prf(StandardPe::ape, 2 * N + 2);
  auto rep_ape = check_prf_characterizes(ape, fam, N);
  CHECK(rep_ape.consistent);
  CHECK(rep_ape.distinct);

  auto rep_const = check_prf_characterizes(constant_prf(1), fam, N);
  CHECK(!rep_const.consistent);
  REQUIRE(!rep_const.counterexamples.empty());
  const auto& ce = rep_const.counterexamples.front();
  CHECK(ce.kind == "consistency");
  CHECK(ce.a.role != ce.b.role);  // two different operator slots share value 1
}

TEST_CASE("characterization fails on the bare parity family for offset PRFs") {
  // In tuple coordinates the first output and the xor steps read their input
  // token at the same offset, so no scale-invariant offset PRF can separate
  // the identity slot from the xor slot.
  auto fam = builtin_family(BuiltinKind::parity, 10);
  auto rpe = standard_prf(StandardPe::rpe, 32);
  auto rep = check_prf_characterizes(rpe, fam, 10);
  CHECK(!rep.consistent);
}

TEST_CASE("value coverage: ipe covered, ape introduces novel values") {
  const int N = 20;
  auto fam = builtin_family(BuiltinKind::parity_aligned, N);

  auto ipe = ipe_prf(TaskKind::parity, N);
  auto cov = check_value_coverage(ipe, fam, 5, 20);
  CHECK(cov.covered);
  CHECK(cov.novel_values.empty());

  auto ape = standard_prf(StandardPe::ape, 2 * N + 2);
  auto cov_ape = check_value_coverage(ape, fam, 5, 20);
  CHECK(!cov_ape.covered);
  // Novel values sit at queries beyond the training scale.
  const int K = 2 * N + 2;
  for (int v : cov_ape.novel_values) CHECK(v / K >= N + 5);

  auto self = check_value_coverage(ape, fam, 7, 7);
  CHECK(self.covered);
}

TEST_CASE("build_prfsh realizes the constructive scale-hinted PRF") {
  auto fam = builtin_family(BuiltinKind::parity, 12);
  auto prfsh = build_prfsh(fam);
  // Slot values: identity gets {1}, xor gets {2, 3}; catch-all is 4. The
  // checker evaluates at the query one position before each step, which the
  // returned function already accounts for.
  CHECK(prfsh.s_max == 4);
  for (int n = 2; n <= 12; ++n) {
    CHECK(prfsh(n - 1, 0, n) == 1);          // step n+1, parent 1 (identity)
    CHECK(prfsh(n, 1, n) == 2);              // step n+2, parent 2 (xor slot 1)
    CHECK(prfsh(n, n, n) == 3);              // step n+2, parent n+1 (xor slot 2)
    CHECK(prfsh(n - 1, 1, n) == prfsh.s_max);  // not a parent edge
  }

  for (BuiltinKind kind : {BuiltinKind::parity, BuiltinKind::multiplication_1n,
                           BuiltinKind::example3_a, BuiltinKind::example3_b,
                           BuiltinKind::parity_aligned}) {
    auto f = builtin_family(kind, 20);
    auto p = build_prfsh(f);
    auto rep = check_prf_characterizes(p, f, 20);
    CHECK_MESSAGE(rep.consistent, "consistency for ", to_string(kind));
    CHECK_MESSAGE(rep.distinct, "distinctness for ", to_string(kind));
  }
}

TEST_CASE("characterization verdicts survive value relabeling") {
  auto fam = builtin_family(BuiltinKind::parity_aligned, 8);
  auto ipe = ipe_prf(TaskKind::parity, 8);
  // Any injective relabeling of PRF values preserves both verdicts.
  std::map<int, int> relabel{{0, 41}, {1, 7}, {2, 23}};
  Prf shuffled{"relabel", 41, [ipe, relabel](int i, int j) { return relabel.at(ipe(i, j)); }};
  auto a = check_prf_characterizes(ipe, fam, 8);
  auto b = check_prf_characterizes(shuffled, fam, 8);
  CHECK(a.consistent == b.consistent);
  CHECK(a.distinct == b.distinct);

  auto cons = constant_prf(1);
  Prf cons2{"relabel2", 9, [](int, int) { return 9; }};
  CHECK(check_prf_characterizes(cons, fam, 8).consistent ==
        check_prf_characterizes(cons2, fam, 8).consistent);
}

TEST_CASE("family json round-trip and eval errors") {
  auto fam = builtin_family(BuiltinKind::multiplication_1n, 5);
  auto back = CircuitFamily::from_json(fam.to_json());
  CHECK(back.alphabet == fam.alphabet);
  CHECK(back.members.size() == fam.members.size());
  CHECK(eval_circuit(back, std::vector<int>{7, 8, 9}) ==
        eval_circuit(fam, std::vector<int>{7, 8, 9}));

  CHECK_THROWS(eval_circuit(fam, std::vector<int>{1}));  // length 1 undefined
  auto aligned = builtin_family(BuiltinKind::parity_aligned, 4);
  CHECK_THROWS(eval_circuit(aligned, std::vector<int>{0, 1, 0, 1, 2}));  // ambiguous
  std::vector<int> padded{1, 0, 1, 0, 2};
  CHECK(eval_circuit_at(aligned, 2, padded) == std::vector<int>{1, 1});
}
