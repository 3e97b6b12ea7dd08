#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "lglab/tasks.hpp"

using namespace lglab;
using namespace lglab::tasks;

namespace {

std::vector<int> toks(const std::string& symbols) {
  std::vector<int> out;
  for (char c : symbols) out.push_back(token_id(std::string(1, c)));
  return out;
}

}  // namespace

TEST_CASE("vocabulary is a stable bijection") {
  std::set<std::string> symbols;
  for (int id = 0; id < vocab_size(); ++id) {
    const auto s = token_symbol(id);
    CHECK(symbols.insert(s).second);
    CHECK(token_id(s) == id);
  }
  CHECK_THROWS(token_id("?"));
  CHECK_THROWS(token_symbol(vocab_size()));
}

TEST_CASE("oracles match the worked examples") {
  CHECK(oracle(TaskKind::copy, toks("31415=")) == toks("31415"));
  CHECK(oracle(TaskKind::reverse, toks("312=")) == toks("213"));
  CHECK(oracle(TaskKind::shift, toks("752=")) == toks("527"));
  CHECK(oracle(TaskKind::parity, toks("101=")) == toks("110"));
  // Base 3: 7 + 8 = 15, digits least significant first with the carry last.
  CHECK(oracle(TaskKind::addition, toks("12+22=")) == toks("021"));
  // 2 * 43 = 86, least significant first, n+1 digits.
  CHECK(oracle(TaskKind::multiplication_1n, toks("2*34=")) == toks("680"));
  // 84 / 2 = 42, dividend and quotient written most significant first.
  CHECK(oracle(TaskKind::division_n1, toks("2\\84=")) == toks("42"));
  CHECK(oracle(TaskKind::select_first, toks("31415=")) == toks("3"));
  CHECK(oracle(TaskKind::select_middle, toks("31415=")) == toks("4"));
  CHECK(oracle(TaskKind::select_last, toks("31415=")) == toks("5"));
}

TEST_CASE("oracle rejects malformed prompts") {
  CHECK_THROWS(oracle(TaskKind::copy, toks("123")));           // no '='
  CHECK_THROWS(oracle(TaskKind::addition, toks("12+2=")));     // unequal addends
  CHECK_THROWS(oracle(TaskKind::addition, toks("19+11=")));    // digit outside base 3
  CHECK_THROWS(oracle(TaskKind::parity, toks("102=")));        // non-binary element
  CHECK_THROWS(oracle(TaskKind::division_n1, toks("0\\84=")));  // zero divisor
  CHECK_THROWS(oracle(TaskKind::multiplication_1n, toks("23*1=")));  // two-digit multiplier
}

TEST_CASE("aligned copy reproduces the padded layout") {
  Rng rng(1);
  auto inst = generate(TaskKind::copy, 5, true, 10, rng);
  REQUIRE(inst.tokens.size() == 21);
  CHECK(inst.answer_start == 11);
  CHECK(inst.tokens[10] == kTokEq);
  for (int k = 5; k < 10; ++k) CHECK(inst.tokens[k] == 0);  // pad region reuses '0'
  for (int k = 0; k < 10; ++k) CHECK(inst.tokens[11 + k] == inst.tokens[k]);
}

TEST_CASE("generated instances round-trip through their oracle") {
  Rng rng(7);
  for (TaskKind task :
       {TaskKind::copy, TaskKind::reverse, TaskKind::shift, TaskKind::parity, TaskKind::addition,
        TaskKind::multiplication_1n, TaskKind::division_n1, TaskKind::select_first,
        TaskKind::select_middle, TaskKind::select_last}) {
    for (int n = 1; n <= 8; ++n) {
      for (int rep = 0; rep < 40; ++rep) {
        auto inst = generate(task, n, false, 0, rng);
        std::span<const int> prompt{inst.tokens.data(), static_cast<std::size_t>(inst.answer_start)};
        const auto want = oracle(task, prompt);
        const std::vector<int> got(inst.tokens.begin() + inst.answer_start, inst.tokens.end());
        REQUIRE(got == want);
        CHECK(static_cast<int>(inst.tokens.size()) == instance_length(task, n, false, 0));
      }
      if (task_supports_aligned(task)) {
        for (int rep = 0; rep < 40; ++rep) {
          auto inst = generate(task, n, true, 10, rng);
          std::span<const int> prompt{inst.tokens.data(),
                                      static_cast<std::size_t>(inst.answer_start)};
          const auto want = oracle(task, prompt);
          const std::vector<int> got(inst.tokens.begin() + inst.answer_start, inst.tokens.end());
          REQUIRE(got == want);
        }
      }
    }
  }
}

TEST_CASE("aligned instances of one task and target length all have the same size") {
  Rng rng(13);
  for (TaskKind task : {TaskKind::copy, TaskKind::reverse, TaskKind::shift, TaskKind::parity,
                        TaskKind::addition, TaskKind::multiplication_1n, TaskKind::division_n1}) {
    const int expect = instance_length(task, 1, true, 12);
    for (int n = 1; n <= 12; ++n) {
      auto inst = generate(task, n, true, 12, rng);
      CHECK(static_cast<int>(inst.tokens.size()) == expect);
    }
  }
}

TEST_CASE("addition instances stay in base 3") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    auto inst = generate(TaskKind::addition, 6, rep % 2 == 0, 8, rng);
    for (int t : inst.tokens) {
      const bool digit = t < 10;
      if (digit) CHECK(t <= 2);
    }
  }
}

TEST_CASE("parity aligned tail repeats the last cot bit") {
  Rng rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + rep % 9, N = 9;
    auto inst = generate(TaskKind::parity, n, true, N, rng);
    const int tail_bit = inst.tokens[inst.answer_start + n - 1];
    for (int k = n; k < N; ++k) CHECK(inst.tokens[inst.answer_start + k] == tail_bit);
  }
}

TEST_CASE("division instances divide exactly and reconstruct the dividend") {
  Rng rng(23);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + rep % 10;
    auto inst = generate(TaskKind::division_n1, n, false, 0, rng);
    const int divisor = inst.tokens[0];
    // Tokens hold x_n..x_1 and z_n..z_1; value them least significant first.
    std::vector<int> dividend(inst.tokens.begin() + 2, inst.tokens.begin() + 2 + n);
    std::vector<int> quotient(inst.tokens.begin() + inst.answer_start, inst.tokens.end());
    std::reverse(dividend.begin(), dividend.end());
    std::reverse(quotient.begin(), quotient.end());
    auto back = digits::mul1(quotient, divisor, 10);
    back.resize(n);
    CHECK(back == dividend);
  }
}

TEST_CASE("sampling is deterministic, uniform over the range, and validated") {
  auto a = sample_dataset(TaskKind::copy, 1, 5, 64, false, 0, 99);
  auto b = sample_dataset(TaskKind::copy, 1, 5, 64, false, 0, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].tokens == b[k].tokens);

  auto degenerate = sample_dataset(TaskKind::shift, 6, 6, 50, false, 0, 4);
  for (const auto& inst : degenerate) CHECK(inst.scale == 6);

  CHECK_THROWS(sample_dataset(TaskKind::copy, 5, 4, 10, false, 0, 1));
  CHECK_THROWS(sample_dataset(TaskKind::copy, 1, 5, 0, false, 0, 1));
  Rng r(1);
  CHECK_THROWS(generate(TaskKind::select_first, 3, true, 10, r));  // no aligned select
}

TEST_CASE("jsonl round-trip") {
  Rng rng(29);
  auto inst = generate(TaskKind::multiplication_1n, 4, true, 6, rng);
  auto back = from_jsonl(to_jsonl(inst));
  CHECK(back.task == inst.task);
  CHECK(back.scale == inst.scale);
  CHECK(back.aligned == inst.aligned);
  CHECK(back.target_length == inst.target_length);
  CHECK(back.tokens == inst.tokens);
  CHECK(back.answer_start == inst.answer_start);
}
