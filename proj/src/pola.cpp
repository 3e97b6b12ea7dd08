#include "lglab/pola.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace lglab::pola {

std::size_t AttentionMatrix::idx(int i, int j) const {
  if (i < 1 || j < 1 || i > n || j > n) throw std::out_of_range("AttentionMatrix index");
  return static_cast<std::size_t>(i - 1) * n + (j - 1);
}

void AttentionMatrix::set(int i, int j, double v) {
  if (i > j && v != 0.0) throw std::invalid_argument("entry below the diagonal must stay zero");
  e[idx(i, j)] = v;
}

void AttentionMatrix::validate() const {
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      const double v = at(i, j);
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite entry");
      if (i > j && v != 0.0) throw std::invalid_argument("nonzero entry below the diagonal");
    }
}

nlohmann::json AttentionMatrix::to_json() const {
  return {{"n", n}, {"entries", e}};
}

AttentionMatrix AttentionMatrix::from_json(const nlohmann::json& j) {
  AttentionMatrix a(j.at("n").get<int>());
  a.e = j.at("entries").get<std::vector<double>>();
  if (a.e.size() != static_cast<std::size_t>(a.n) * a.n)
    throw std::invalid_argument("entry count does not match n*n");
  a.validate();
  return a;
}

AttentionMatrix IndicatorFamily::mask(int s) const {
  AttentionMatrix m(n);
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j)
      if (cls(i, j) == s) m.set(i, j, 1.0);
  return m;
}

void IndicatorFamily::validate() const {
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      const int c = class_of[static_cast<std::size_t>(i - 1) * n + (j - 1)];
      if (i > j) {
        if (c != 0) throw std::invalid_argument("class assigned below the diagonal");
      } else if (c < 1 || c > s_max) {
        // Exactly one class per upper-triangular cell: disjointness and
        // coverage in one condition.
        throw std::invalid_argument("upper-triangular cell not covered by exactly one class");
      }
    }
}

double pola_forward(const std::vector<double>& x, int n, const AttentionMatrix& a) {
  if (static_cast<int>(x.size()) != a.n) throw std::invalid_argument("x has wrong length");
  if (n < 1 || n > a.n) throw std::out_of_range("position n out of range");
  double acc = 0.0;
  for (int i = 1; i <= a.n; ++i) acc += x[i - 1] * a.at(i, n);
  return acc;
}

IndicatorFamily prf_to_indicators(const Prf& prf, int n) {
  IndicatorFamily ind;
  ind.n = n;
  ind.class_of.assign(static_cast<std::size_t>(n) * n, 0);
  // Cell (key row i, query column j), 1-based, maps to the 0-based PRF pair
  // (query j-1, key i-1).
  std::map<int, int> relabel;  // raw PRF value -> dense class id
  for (int j = 1; j <= n; ++j) {
    for (int i = 1; i <= j; ++i) {
      const int raw = prf(j - 1, i - 1);
      const auto it = relabel.try_emplace(raw, static_cast<int>(relabel.size()) + 1).first;
      ind.class_of[static_cast<std::size_t>(i - 1) * n + (j - 1)] = it->second;
    }
  }
  ind.s_max = static_cast<int>(relabel.size());
  ind.validate();
  return ind;
}

namespace {

// Distinct values within tol among a list: sort, then split at gaps > tol.
int count_value_classes(std::vector<double> vals, double tol) {
  if (vals.empty()) return 0;
  std::sort(vals.begin(), vals.end());
  int classes = 1;
  for (std::size_t k = 1; k < vals.size(); ++k)
    if (vals[k] - vals[k - 1] > tol) ++classes;
  return classes;
}

std::vector<double> nonzero_upper_values(const AttentionMatrix& a, int col_max) {
  std::vector<double> vals;
  for (int j = 1; j <= col_max; ++j)
    for (int i = 1; i <= j; ++i)
      if (a.at(i, j) != 0.0) vals.push_back(a.at(i, j));
  return vals;
}

}  // namespace

int lrc_of_matrix(const AttentionMatrix& a, double tol) {
  return count_value_classes(nonzero_upper_values(a, a.n), tol);
}

int lrc_of_prefix_function(const AttentionMatrix& a_star, int n0, double tol) {
  if (n0 < 0 || n0 > a_star.n) throw std::out_of_range("n0 out of range");
  return count_value_classes(nonzero_upper_values(a_star, n0), tol);
}

namespace {

// Representative values of the distinct-nonzero-value classes, sorted.
std::vector<double> class_representatives(const AttentionMatrix& a, double tol) {
  auto vals = nonzero_upper_values(a, a.n);
  std::sort(vals.begin(), vals.end());
  std::vector<double> reps;
  for (std::size_t k = 0; k < vals.size(); ++k)
    if (k == 0 || vals[k] - vals[k - 1] > tol) reps.push_back(vals[k]);
  return reps;
}

int find_class(const std::vector<double>& reps, double v, double tol) {
  for (std::size_t s = 0; s < reps.size(); ++s)
    if (std::abs(v - reps[s]) <= tol) return static_cast<int>(s) + 1;
  // Tol-grouping was built by gap splitting, so members can sit up to one gap
  // away from the representative; fall back to the nearest class.
  int best = 1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < reps.size(); ++s) {
    const double d = std::abs(v - reps[s]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(s) + 1;
    }
  }
  return best;
}

}  // namespace

Prf value_class_prf(const AttentionMatrix& a_star, double tol) {
  const auto reps = class_representatives(a_star, tol);
  const int S = static_cast<int>(reps.size()) + 1;  // catch-all class for zero cells
  const int n = a_star.n;
  // Copy the matrix into the closure; the PRF must outlive the argument.
  auto entries = a_star.e;
  return {"value_class", S, [entries, reps, tol, n, S](int qi, int kj) {
            if (qi >= n || kj >= n) throw std::out_of_range("value-class PRF queried beyond N");
            // 0-based (query, key) -> 1-based cell (key+1, query+1).
            const double v = entries[static_cast<std::size_t>(kj) * n + qi];
            if (v == 0.0) return S;
            return find_class(reps, v, tol);
          }};
}

Prf theorem2_prf(const AttentionMatrix& a_star, int n0, double tol) {
  if (lrc_of_prefix_function(a_star, n0, tol) != lrc_of_matrix(a_star, tol))
    throw IncreasingLrcError(
        "LRC grows outside the prefix block; no position embedding can reproduce this target");
  Prf prf = value_class_prf(a_star, tol);
  prf.name = "theorem2";
  return prf;
}

PolaParams min_norm_solution(const AttentionMatrix& a_star, int n0,
                             const IndicatorFamily& ind, double tol) {
  if (ind.n != a_star.n) throw std::invalid_argument("indicator family size mismatch");
  PolaParams p;
  p.q.assign(ind.s_max, 0.0);
  std::vector<bool> seen(ind.s_max, false);
  for (int j = 1; j <= std::min(n0, ind.n); ++j) {
    for (int i = 1; i <= j; ++i) {
      const int s = ind.cls(i, j);
      const double v = a_star.at(i, j);
      if (!seen[s - 1]) {
        seen[s - 1] = true;
        p.q[s - 1] = v;
      } else if (std::abs(p.q[s - 1] - v) > tol) {
        throw InconsistentClassError(
            "PRF merges cells the target distinguishes (class " + std::to_string(s) + ")");
      }
    }
  }
  return p;
}

PolaDataset basis_dataset(const AttentionMatrix& a_star, int n0) {
  PolaDataset d;
  for (int n = 1; n <= n0; ++n) {
    for (int i = 1; i <= n; ++i) {
      PolaDataset::Pair pr;
      pr.x.assign(a_star.n, 0.0);
      pr.x[i - 1] = 1.0;
      pr.n = n;
      pr.label = a_star.at(i, n);
      d.pairs.push_back(std::move(pr));
    }
  }
  return d;
}

PolaParams train_pola_gd(const PolaDataset& data, const IndicatorFamily& ind, GdOptions opt) {
  const int S = ind.s_max;
  // Feature s of a pair (x, n) is <x e_n^T, U_s>.
  std::vector<std::vector<double>> feats;
  feats.reserve(data.pairs.size());
  for (const auto& pr : data.pairs) {
    if (static_cast<int>(pr.x.size()) != ind.n) throw std::invalid_argument("pair length mismatch");
    std::vector<double> f(S, 0.0);
    for (int i = 1; i <= pr.n; ++i)
      if (pr.x[i - 1] != 0.0) f[ind.cls(i, pr.n) - 1] += pr.x[i - 1];
    feats.push_back(std::move(f));
  }

  double lr = opt.lr;
  if (lr == 0.0) {
    double trace = 0.0;
    for (const auto& f : feats)
      for (double v : f) trace += v * v;
    lr = trace > 0.0 ? 1.0 / (2.0 * trace) : 1.0;
  }

  auto loss_of = [&](const std::vector<double>& q) {
    double l = 0.0;
    for (std::size_t k = 0; k < feats.size(); ++k) {
      double pred = 0.0;
      for (int s = 0; s < S; ++s) pred += q[s] * feats[k][s];
      const double r = pred - data.pairs[k].label;
      l += 0.5 * r * r;
    }
    return l;
  };

  std::vector<double> q(S, 0.0);
  const double guard = 10.0 * loss_of(q) + 1.0;
  std::vector<double> grad(S);
  for (long step = 0; step < opt.max_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < feats.size(); ++k) {
      double pred = 0.0;
      for (int s = 0; s < S; ++s) pred += q[s] * feats[k][s];
      const double r = pred - data.pairs[k].label;
      for (int s = 0; s < S; ++s) grad[s] += r * feats[k][s];
    }
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax <= opt.grad_tol) break;
    for (int s = 0; s < S; ++s) q[s] -= lr * grad[s];
    const double l = loss_of(q);
    if (!std::isfinite(l) || l > guard)
      throw DivergedError("gradient descent diverged (loss " + std::to_string(l) + ")");
  }
  return {std::move(q)};
}

LgReport verify_lg(const PolaParams& q, const IndicatorFamily& ind,
                   const AttentionMatrix& a_star, int n_max, double tol) {
  LgReport rep;
  rep.max_error = 0.0;
  // Checking every basis vector at every position suffices by linearity.
  for (int n = 1; n <= std::min(n_max, a_star.n); ++n) {
    for (int i = 1; i <= n; ++i) {
      const double pred = q.q[ind.cls(i, n) - 1];
      const double err = std::abs(pred - a_star.at(i, n));
      if (err > rep.max_error) {
        rep.max_error = err;
        rep.witness = {i, n};
      }
    }
  }
  rep.exact = rep.max_error <= tol;
  if (rep.exact) rep.witness.reset();
  return rep;
}

AttentionMatrix random_target(Rng& rng, int n, int n0, int palette_size, bool increasing) {
  if (n0 < 1 || n0 > n) throw std::invalid_argument("n0 out of range");
  if (palette_size < 1 || palette_size > n0 * (n0 + 1) / 2)
    throw std::invalid_argument("palette larger than the prefix block");
  // Distinct, well-separated values so tolerance grouping is unambiguous.
  std::vector<double> palette(palette_size);
  for (int s = 0; s < palette_size; ++s)
    palette[s] = (s + 1) * 0.5 + rng.uniform(0.0, 0.2);

  AttentionMatrix a(n);
  // Every palette value appears in the prefix block at least once.
  std::vector<std::pair<int, int>> prefix_cells;
  for (int j = 1; j <= n0; ++j)
    for (int i = 1; i <= j; ++i) prefix_cells.emplace_back(i, j);
  rng.shuffle(prefix_cells);
  for (int s = 0; s < palette_size; ++s)
    a.set(prefix_cells[s].first, prefix_cells[s].second, palette[s]);
  for (std::size_t k = palette_size; k < prefix_cells.size(); ++k) {
    const int pick = static_cast<int>(rng.uniform_int(0, palette_size));
    a.set(prefix_cells[k].first, prefix_cells[k].second,
          pick == palette_size ? 0.0 : palette[pick]);
  }
  // Cells in columns > n0 reuse the palette (or stay zero).
  for (int j = n0 + 1; j <= n; ++j)
    for (int i = 1; i <= j; ++i) {
      const int pick = static_cast<int>(rng.uniform_int(0, palette_size));
      a.set(i, j, pick == palette_size ? 0.0 : palette[pick]);
    }
  if (increasing) {
    const double fresh = palette_size * 0.5 + 1.0 + rng.uniform(0.0, 0.2);
    const int j = static_cast<int>(rng.uniform_int(n0 + 1, n));
    const int i = static_cast<int>(rng.uniform_int(1, j));
    a.set(i, j, fresh);
  }
  return a;
}

nlohmann::json params_to_json(const PolaParams& p) {
  return {{"s", p.q.size()}, {"q", p.q}};
}

PolaParams params_from_json(const nlohmann::json& j) {
  PolaParams p;
  p.q = j.at("q").get<std::vector<double>>();
  if (j.contains("s") && j.at("s").get<std::size_t>() != p.q.size())
    throw std::invalid_argument("declared S does not match q length");
  return p;
}

}  // namespace lglab::pola
