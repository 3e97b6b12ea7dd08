#include "lglab/tasks.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace lglab::tasks {

namespace {

const char* kTaskNames[] = {"copy",        "reverse",           "shift",
                            "parity",      "addition",          "multiplication_1n",
                            "division_n1", "select_first",      "select_middle",
                            "select_last"};

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::string to_string(TaskKind k) { return kTaskNames[static_cast<int>(k)]; }

TaskKind task_from_string(const std::string& s) {
  for (int i = 0; i < 10; ++i)
    if (s == kTaskNames[i]) return static_cast<TaskKind>(i);
  throw std::invalid_argument("unknown task: " + s);
}

std::string token_symbol(int id) {
  require(id >= 0 && id < vocab_size(), "token id out of range");
  if (id < 10) return std::string(1, static_cast<char>('0' + id));
  switch (id) {
    case kTokPlus: return "+";
    case kTokTimes: return "*";
    case kTokDiv: return "\\";
    default: return "=";
  }
}

int token_id(const std::string& symbol) {
  require(symbol.size() == 1, "token symbol must be a single character");
  const char c = symbol[0];
  if (c >= '0' && c <= '9') return c - '0';
  switch (c) {
    case '+': return kTokPlus;
    case '*': return kTokTimes;
    case '\\': return kTokDiv;
    case '=': return kTokEq;
    default: throw std::invalid_argument("unknown token symbol: " + symbol);
  }
}

int task_base(TaskKind k) {
  switch (k) {
    case TaskKind::parity: return 2;
    case TaskKind::addition: return 3;  // all Addition instances are base 3
    default: return 10;
  }
}

bool task_supports_aligned(TaskKind k) {
  return k != TaskKind::select_first && k != TaskKind::select_middle &&
         k != TaskKind::select_last;
}

namespace digits {

std::vector<int> add(std::span<const int> a, std::span<const int> b, int base) {
  std::vector<int> out;
  out.reserve(std::max(a.size(), b.size()) + 1);
  int carry = 0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    int s = carry;
    if (i < a.size()) s += a[i];
    if (i < b.size()) s += b[i];
    out.push_back(s % base);
    carry = s / base;
  }
  out.push_back(carry);
  return out;  // always one extra digit; trailing zero when no overflow
}

std::vector<int> mul1(std::span<const int> a, int m, int base) {
  std::vector<int> out;
  out.reserve(a.size() + 1);
  int carry = 0;
  for (int d : a) {
    const int p = d * m + carry;
    out.push_back(p % base);
    carry = p / base;
  }
  out.push_back(carry);
  return out;
}

bool div1(std::span<const int> a, int d, int base, std::vector<int>& quotient) {
  quotient.assign(a.size(), 0);
  int rem = 0;
  for (std::size_t i = a.size(); i-- > 0;) {
    const int cur = rem * base + a[i];
    quotient[i] = cur / d;
    rem = cur % d;
  }
  return rem == 0;
}

}  // namespace digits

namespace {

// Splits a prompt into digit runs separated by operator tokens; the final
// token must be '='.
struct ParsedPrompt {
  std::vector<std::vector<int>> runs;  // digit groups, in prompt order
  std::vector<int> ops;                // operator ids between the groups
};

ParsedPrompt parse_prompt(std::span<const int> prompt) {
  require(!prompt.empty() && prompt.back() == kTokEq, "prompt must end with '='");
  ParsedPrompt p;
  p.runs.emplace_back();
  for (std::size_t i = 0; i + 1 < prompt.size(); ++i) {
    const int t = prompt[i];
    if (t < 10) {
      p.runs.back().push_back(t);
    } else {
      require(t != kTokEq, "unexpected '=' inside prompt");
      p.ops.push_back(t);
      p.runs.emplace_back();
    }
  }
  return p;
}

}  // namespace

std::vector<int> oracle(TaskKind task, std::span<const int> prompt) {
  ParsedPrompt p = parse_prompt(prompt);
  const int base = task_base(task);
  switch (task) {
    case TaskKind::copy: {
      require(p.runs.size() == 1, "copy: malformed prompt");
      return p.runs[0];
    }
    case TaskKind::reverse: {
      require(p.runs.size() == 1, "reverse: malformed prompt");
      std::vector<int> out(p.runs[0].rbegin(), p.runs[0].rend());
      return out;
    }
    case TaskKind::shift: {
      require(p.runs.size() == 1 && !p.runs[0].empty(), "shift: malformed prompt");
      std::vector<int> out(p.runs[0].begin() + 1, p.runs[0].end());
      out.push_back(p.runs[0][0]);
      return out;
    }
    case TaskKind::parity: {
      require(p.runs.size() == 1, "parity: malformed prompt");
      std::vector<int> out;
      int acc = 0;
      for (int b : p.runs[0]) {
        require(b < 2, "parity: non-binary element");
        acc ^= b;
        out.push_back(acc);
      }
      return out;
    }
    case TaskKind::addition: {
      require(p.runs.size() == 2 && p.ops == std::vector<int>{kTokPlus} &&
                  p.runs[0].size() == p.runs[1].size(),
              "addition: malformed prompt");
      for (const auto& run : p.runs)
        for (int d : run) require(d < base, "addition: digit out of base");
      return digits::add(p.runs[0], p.runs[1], base);  // n+1 digits, LSB first
    }
    case TaskKind::multiplication_1n: {
      require(p.runs.size() == 2 && p.ops == std::vector<int>{kTokTimes} &&
                  p.runs[0].size() == 1,
              "multiplication: malformed prompt");
      return digits::mul1(p.runs[1], p.runs[0][0], base);  // n+1 digits, LSB first
    }
    case TaskKind::division_n1: {
      require(p.runs.size() == 2 && p.ops == std::vector<int>{kTokDiv} &&
                  p.runs[0].size() == 1 && p.runs[0][0] != 0,
              "division: malformed prompt");
      // The dividend arrives most-significant digit first.
      std::vector<int> lsb(p.runs[1].rbegin(), p.runs[1].rend());
      std::vector<int> q;
      require(digits::div1(lsb, p.runs[0][0], base, q), "division: inexact instance");
      return {q.rbegin(), q.rend()};
    }
    case TaskKind::select_first:
    case TaskKind::select_middle:
    case TaskKind::select_last: {
      require(p.runs.size() == 1 && !p.runs[0].empty(), "select: malformed prompt");
      const auto& x = p.runs[0];
      const int n = static_cast<int>(x.size());
      int idx = 0;
      if (task == TaskKind::select_middle) idx = n / 2;  // x_{floor(n/2)+1}, 1-based
      if (task == TaskKind::select_last) idx = n - 1;
      return {x[idx]};
    }
  }
  throw std::logic_error("unreachable");
}

int instance_length(TaskKind task, int n, bool aligned, int N) {
  const int len = aligned ? N : n;
  switch (task) {
    case TaskKind::copy:
    case TaskKind::reverse:
    case TaskKind::shift:
    case TaskKind::parity:
      return 2 * len + 1;
    case TaskKind::addition:
      return 3 * len + 3;  // x + y = z with z one digit longer
    case TaskKind::multiplication_1n:
      return 2 * len + 4;  // product carries an extra digit
    case TaskKind::division_n1:
      return 2 * len + 3;  // quotient stays at n digits
    default:
      return n + 2;  // select: x_1..x_n = y
  }
}

TaskInstance generate(TaskKind task, int n, bool aligned, int target_length, Rng& rng) {
  require(n >= 1, "scale must be >= 1");
  if (aligned) {
    require(task_supports_aligned(task), "task has no aligned format");
    require(n <= target_length, "scale out of range for target length");
  }
  const int base = task_base(task);
  const int len = aligned ? target_length : n;

  auto draw_digits = [&](int count) {
    std::vector<int> d(count);
    for (auto& x : d) x = static_cast<int>(rng.uniform_int(0, base - 1));
    return d;
  };
  // Sampled elements followed by the alignment padding, which reuses '0'.
  auto padded = [&](std::vector<int> d) {
    d.resize(len, 0);
    return d;
  };

  TaskInstance inst;
  inst.task = task;
  inst.scale = n;
  inst.aligned = aligned;
  inst.target_length = aligned ? target_length : 0;

  std::vector<int>& t = inst.tokens;
  switch (task) {
    case TaskKind::copy:
    case TaskKind::reverse:
    case TaskKind::shift:
    case TaskKind::parity: {
      t = padded(draw_digits(n));
      t.push_back(kTokEq);
      break;
    }
    case TaskKind::addition: {
      t = padded(draw_digits(n));
      t.push_back(kTokPlus);
      auto y = padded(draw_digits(n));
      t.insert(t.end(), y.begin(), y.end());
      t.push_back(kTokEq);
      break;
    }
    case TaskKind::multiplication_1n: {
      t.push_back(static_cast<int>(rng.uniform_int(0, base - 1)));
      t.push_back(kTokTimes);
      auto x = padded(draw_digits(n));
      t.insert(t.end(), x.begin(), x.end());
      t.push_back(kTokEq);
      break;
    }
    case TaskKind::division_n1: {
      // Sample quotient and divisor, then multiply back so the division is
      // exact; resample until the product still fits in n digits.
      const int divisor = static_cast<int>(rng.uniform_int(1, base - 1));
      std::vector<int> dividend;
      for (;;) {
        auto quotient = draw_digits(n);
        auto prod = digits::mul1(quotient, divisor, base);
        if (prod[n] == 0) {
          prod.resize(n);
          dividend = std::move(prod);
          break;
        }
      }
      t.push_back(divisor);
      t.push_back(kTokDiv);
      auto x = padded(dividend);
      t.insert(t.end(), x.rbegin(), x.rend());  // dividend written x_n .. x_1
      t.push_back(kTokEq);
      break;
    }
    case TaskKind::select_first:
    case TaskKind::select_middle:
    case TaskKind::select_last: {
      t = draw_digits(n);
      t.push_back(kTokEq);
      break;
    }
  }

  inst.answer_start = static_cast<int>(t.size());
  // Applying the oracle to the padded prompt yields the aligned answer as-is,
  // including parity's repeated-tail bits.
  auto answer = oracle(task, t);
  t.insert(t.end(), answer.begin(), answer.end());
  return inst;
}

std::vector<TaskInstance> sample_dataset(TaskKind task, int scale_lo, int scale_hi, int count,
                                         bool aligned, int target_length, std::uint64_t seed) {
  require(count >= 1, "count must be >= 1");
  require(scale_lo >= 1 && scale_lo <= scale_hi, "empty scale range");
  std::vector<TaskInstance> out;
  out.reserve(count);
  Rng root(seed);
  for (int i = 0; i < count; ++i) {
    // One independent stream per element keeps generation order-free.
    Rng r = root.fork(static_cast<std::uint64_t>(i));
    const int n = static_cast<int>(r.uniform_int(scale_lo, scale_hi));
    out.push_back(generate(task, n, aligned, target_length, r));
  }
  return out;
}

std::string to_jsonl(const TaskInstance& inst) {
  nlohmann::json j;
  j["task"] = to_string(inst.task);
  j["scale"] = inst.scale;
  j["aligned"] = inst.aligned;
  j["target_length"] = inst.target_length;
  auto& toks = j["tokens"] = nlohmann::json::array();
  for (int t : inst.tokens) toks.push_back(token_symbol(t));
  j["answer_start"] = inst.answer_start;
  return j.dump();
}

TaskInstance from_jsonl(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TaskInstance inst;
  inst.task = task_from_string(j.at("task").get<std::string>());
  inst.scale = j.at("scale").get<int>();
  inst.aligned = j.at("aligned").get<bool>();
  inst.target_length = j.at("target_length").get<int>();
  for (const auto& s : j.at("tokens")) inst.tokens.push_back(token_id(s.get<std::string>()));
  inst.answer_start = j.at("answer_start").get<int>();
  return inst;
}

}  // namespace lglab::tasks
