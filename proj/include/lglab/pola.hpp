#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lglab/prf.hpp"
#include "lglab/rng.hpp"

// Position-only linear attention: f(x, n; A) = x^T A e_n with A upper
// triangular. Everything in this namespace is 1-based, matching the matrix
// algebra; the PRF objects it exchanges with the rest of the project stay
// 0-based, and the conversion happens exactly at prf_to_indicators /
// theorem2_prf.
namespace lglab::pola {

struct IncreasingLrcError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentClassError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Upper-triangular N x N matrix. at(i, j) uses 1-based indices; writes below
// the diagonal throw.
struct AttentionMatrix {
  int n = 0;
  std::vector<double> e;  // row-major, zero below the diagonal

  explicit AttentionMatrix(int n_) : n(n_), e(static_cast<std::size_t>(n_) * n_, 0.0) {}

  double at(int i, int j) const { return e[idx(i, j)]; }
  void set(int i, int j, double v);
  void validate() const;  // upper-triangular, all entries finite

  nlohmann::json to_json() const;
  static AttentionMatrix from_json(const nlohmann::json& j);

 private:
  std::size_t idx(int i, int j) const;
};

// Disjoint {0,1} masks covering the upper triangle, built from a total PRF.
// cls(i, j) is the 1-based class of cell (i, j); classes run 1..s_max.
struct IndicatorFamily {
  int n = 0;
  int s_max = 0;
  std::vector<int> class_of;  // 0 below the diagonal

  int cls(int i, int j) const { return class_of[static_cast<std::size_t>(i - 1) * n + (j - 1)]; }
  AttentionMatrix mask(int s) const;
  void validate() const;  // disjointness and coverage
};

struct PolaParams {
  std::vector<double> q;  // q[s-1] holds the coefficient of class s
};

struct PolaDataset {
  struct Pair {
    std::vector<double> x;
    int n = 0;
    double label = 0.0;
  };
  std::vector<Pair> pairs;
};

double pola_forward(const std::vector<double>& x, int n, const AttentionMatrix& a);

IndicatorFamily prf_to_indicators(const Prf& prf, int n);

// Number of distinct values (within tol) among the nonzero upper-triangular
// entries; equals the minimal disjoint-mask count.
int lrc_of_matrix(const AttentionMatrix& a, double tol = 1e-9);

// Same count restricted to columns 1..n0; unobserved columns are free and
// minimally zero, so this is the minimum over all interpolating parameters.
int lrc_of_prefix_function(const AttentionMatrix& a_star, int n0, double tol = 1e-9);

// The constructive PE: one PRF value per distinct-nonzero-value class of
// a_star plus a catch-all class for zero cells. Requires the prefix and full
// LRC to agree; throws IncreasingLrcError otherwise.
Prf theorem2_prf(const AttentionMatrix& a_star, int n0, double tol = 1e-9);

// The same class construction without the non-increasing precondition; the
// PE an omniscient designer would pick. On targets whose LRC grows past the
// prefix it still cannot generalize: the fresh class is never observed, so
// least-norm training leaves it at zero.
Prf value_class_prf(const AttentionMatrix& a_star, double tol = 1e-9);

// Closed-form least-norm interpolator: classes observed inside the
// [n0] x [n0] block take their shared value, unobserved classes stay 0.
// Throws InconsistentClassError when a class mixes two observed values.
PolaParams min_norm_solution(const AttentionMatrix& a_star, int n0,
                             const IndicatorFamily& ind, double tol = 1e-9);

// All pairs (e_i, n) with i <= n <= n0, labeled by a_star. By linearity this
// training set pins down the observable block exactly.
PolaDataset basis_dataset(const AttentionMatrix& a_star, int n0);

struct GdOptions {
  double lr = 0.0;  // 0 selects 1 / (2 tr(Gram))
  long max_steps = 100000;
  double grad_tol = 1e-10;
};

PolaParams train_pola_gd(const PolaDataset& data, const IndicatorFamily& ind,
                         GdOptions opt = {});

struct LgReport {
  bool exact = false;
  double max_error = 0.0;
  std::optional<std::pair<int, int>> witness;  // (basis index i, position n)
};

LgReport verify_lg(const PolaParams& q, const IndicatorFamily& ind,
                   const AttentionMatrix& a_star, int n_max, double tol);

// Targets for the two regimes: non-increasing targets reuse a palette drawn
// inside the prefix block; increasing targets also plant a fresh value in
// columns > n0.
AttentionMatrix random_target(Rng& rng, int n, int n0, int palette_size, bool increasing);

nlohmann::json params_to_json(const PolaParams& p);
PolaParams params_from_json(const nlohmann::json& j);

}  // namespace lglab::pola
