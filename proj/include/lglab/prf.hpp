#pragma once

#include <functional>
#include <string>

#include "json.hpp"
#include "lglab/tasks.hpp"

namespace lglab {

// Positional relation function phi(i, j) on query position i and key position
// j, 0-based, defined for 0 <= j <= i. Values are integers in [0, s_max];
// value 0 is the catch-all in the task-specific tables.
struct Prf {
  std::string name;
  int s_max = 0;
  std::function<int(int, int)> fn;

  int operator()(int i, int j) const;
};

// Scale-hinted variant: phi(i, j, n) with the instance scale n as an extra
// input.
struct PrfSh {
  std::string name;
  int s_max = 0;
  std::function<int(int, int, int)> fn;

  int operator()(int i, int j, int n) const;
};

enum class StandardPe { ape, rpe };

// APE maps (i, j) to i*K + j with K = n_max, so every pair gets its own
// value; RPE maps it to i - j.
Prf standard_prf(StandardPe kind, int n_max);

Prf constant_prf(int value = 1);

// Task-specific PRF over data coordinates: instances aligned to n_max, one
// symbol per token, separators included. Supported tasks: copy, shift,
// parity, addition, multiplication_1n, division_n1.
Prf ipe_prf(tasks::TaskKind task, int n_max);

// Scale-hinted rows exist for addition, multiplication_1n and division_n1.
PrfSh ipe_sh_prf(tasks::TaskKind task);

// Generic scale-hinted form phi(i,j,n) = K*floor((i-j)/n) + min((i-j) mod n,
// K-1); works for any task. n_max bounds the value range.
PrfSh generic_sh_prf(int K, int n_max);

// Dense tables for inspection and export.
nlohmann::json prf_table_json(const Prf& prf, int n);
nlohmann::json prf_table_json(const PrfSh& prf, int n, int scale_lo, int scale_hi);

}  // namespace lglab
