#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lglab/rng.hpp"

namespace lglab::tasks {

enum class TaskKind {
  copy,
  reverse,
  shift,
  parity,
  addition,
  multiplication_1n,
  division_n1,
  select_first,
  select_middle,
  select_last,
};

std::string to_string(TaskKind k);
TaskKind task_from_string(const std::string& s);

// One shared vocabulary across all tasks: digits 0-9 then the operator and
// separator symbols. Ids are stable across runs and serialized by symbol.
inline constexpr int kTokPlus = 10;
inline constexpr int kTokTimes = 11;
inline constexpr int kTokDiv = 12;
inline constexpr int kTokEq = 13;

constexpr int vocab_size() { return 14; }
std::string token_symbol(int id);
int token_id(const std::string& symbol);

int task_base(TaskKind k);            // digit base of the element alphabet
bool task_supports_aligned(TaskKind k);  // Select tasks have no aligned format

struct TaskInstance {
  TaskKind task = TaskKind::copy;
  int scale = 0;           // effective length n
  bool aligned = false;
  int target_length = 0;   // N when aligned, otherwise 0
  std::vector<int> tokens;
  int answer_start = 0;    // index of the first answer token
};

// Ground truth for a prompt (tokens up to and including '='). Aligned prompts
// need no special handling: applying the unaligned rule to the padded prompt
// reproduces the aligned answer for every task.
std::vector<int> oracle(TaskKind task, std::span<const int> prompt);

TaskInstance generate(TaskKind task, int n, bool aligned, int target_length, Rng& rng);

std::vector<TaskInstance> sample_dataset(TaskKind task, int scale_lo, int scale_hi, int count,
                                         bool aligned, int target_length, std::uint64_t seed);

// Total token count of an instance with the given parameters.
int instance_length(TaskKind task, int n, bool aligned, int target_length);

std::string to_jsonl(const TaskInstance& inst);
TaskInstance from_jsonl(const std::string& line);

// Schoolbook digit-vector arithmetic, least-significant digit first. The task
// scales stay small, but the generators make no word-size assumption.
namespace digits {
std::vector<int> add(std::span<const int> a, std::span<const int> b, int base);
std::vector<int> mul1(std::span<const int> a, int m, int base);
// Exact division by a single digit; returns false if a remainder is left.
bool div1(std::span<const int> a, int d, int base, std::vector<int>& quotient);
}  // namespace digits

}  // namespace lglab::tasks
