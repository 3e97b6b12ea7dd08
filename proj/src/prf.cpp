#include "lglab/prf.hpp"

#include <stdexcept>

namespace lglab {

namespace {

void check_pair(int i, int j) {
  if (j < 0 || j > i) throw std::invalid_argument("PRF queried outside 0 <= j <= i");
}

void check_value(int v, int s_max, const std::string& name) {
  if (v < 0 || v > s_max)
    throw std::out_of_range("PRF '" + name + "' produced value outside [0, s_max]");
}

}  // namespace

int Prf::operator()(int i, int j) const {
  check_pair(i, j);
  const int v = fn(i, j);
  check_value(v, s_max, name);
  return v;
}

int PrfSh::operator()(int i, int j, int n) const {
  check_pair(i, j);
  if (n < 1) throw std::invalid_argument("PRF-SH scale hint must be >= 1");
  const int v = fn(i, j, n);
  check_value(v, s_max, name);
  return v;
}

Prf standard_prf(StandardPe kind, int n_max) {
  if (kind == StandardPe::rpe) {
    return {"rpe", n_max - 1, [](int i, int j) { return i - j; }};
  }
  const int K = n_max;
  return {"ape", n_max * n_max - 1, [K](int i, int j) { return i * K + j; }};
}

Prf constant_prf(int value) {
  return {"constant", value, [value](int, int) { return value; }};
}

Prf ipe_prf(tasks::TaskKind task, int n_max) {
  using tasks::TaskKind;
  const int N = n_max;
  switch (task) {
    case TaskKind::copy:
      return {"ipe:copy", 1, [N](int i, int j) { return i - j == N ? 1 : 0; }};
    case TaskKind::shift:
      return {"ipe:shift", 2, [N](int i, int j) {
                if (i == 2 * N - 1 && j == 0) return 1;
                if (i < 2 * N - 1 && i - j == N - 1) return 2;
                return 0;
              }};
    case TaskKind::parity:
      return {"ipe:parity", 2, [N](int i, int j) {
                if (i - j == 0) return 1;
                if (i - j == N) return 2;
                return 0;
              }};
    case TaskKind::addition:
      return {"ipe:addition", 5, [N](int i, int j) {
                const int d = i - j;
                if (d == 0) return 1;
                if (d == N) return 2;
                if (d == N + 1) return 3;
                if (d == 2 * N + 1) return 4;
                if (d == 2 * N + 2) return 5;
                return 0;
              }};
    case TaskKind::multiplication_1n:
    case TaskKind::division_n1:
      return {"ipe:" + tasks::to_string(task), 4, [N](int i, int j) {
                if (j == 0) return 1;
                const int d = i - j;
                if (d == 0) return 2;
                if (d == N) return 3;
                if (d == N + 1) return 4;
                return 0;
              }};
    default:
      throw std::invalid_argument("no IPE table for task " + tasks::to_string(task));
  }
}

PrfSh ipe_sh_prf(tasks::TaskKind task) {
  using tasks::TaskKind;
  switch (task) {
    case TaskKind::addition:
      return {"ipe_sh:addition", 5, [](int i, int j, int n) {
                const int d = i - j;
                if (d == 0) return 1;
                if (d == n) return 2;
                if (d == n + 1) return 3;
                if (d == 2 * n + 1) return 4;
                if (d == 2 * n + 2) return 5;
                return 0;
              }};
    case TaskKind::multiplication_1n:
    case TaskKind::division_n1:
      return {"ipe_sh:" + tasks::to_string(task), 4, [](int i, int j, int n) {
                if (j == 0) return 1;
                const int d = i - j;
                if (d == 0) return 2;
                if (d == n) return 3;
                if (d == n + 1) return 4;
                return 0;
              }};
    default:
      throw std::invalid_argument("no IPE-SH table for task " + tasks::to_string(task));
  }
}

PrfSh generic_sh_prf(int K, int n_max) {
  if (K < 1) throw std::invalid_argument("generic_sh_prf: K must be >= 1");
  return {"generic_sh", K * (n_max - 1) + K - 1, [K](int i, int j, int n) {
            const int d = i - j;
            return K * (d / n) + std::min(d % n, K - 1);
          }};
}

nlohmann::json prf_table_json(const Prf& prf, int n) {
  nlohmann::json j;
  j["name"] = prf.name;
  j["s_max"] = prf.s_max;
  j["n"] = n;
  auto& rows = j["values"] = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k <= i; ++k) row.push_back(prf(i, k));
    rows.push_back(std::move(row));
  }
  return j;
}

nlohmann::json prf_table_json(const PrfSh& prf, int n, int scale_lo, int scale_hi) {
  nlohmann::json j;
  j["name"] = prf.name;
  j["s_max"] = prf.s_max;
  j["n"] = n;
  auto& scales = j["scales"] = nlohmann::json::object();
  for (int s = scale_lo; s <= scale_hi; ++s) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k <= i; ++k) row.push_back(prf(i, k, s));
      rows.push_back(std::move(row));
    }
    scales[std::to_string(s)] = std::move(rows);
  }
  return j;
}

}  // namespace lglab
