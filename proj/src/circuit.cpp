#include "lglab/circuit.hpp"

#include <algorithm>
#include <cmath>

namespace lglab::circ {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

long ipow(int b, int e) {
  long r = 1;
  for (int k = 0; k < e; ++k) r *= b;
  return r;
}

}  // namespace

int UnitOperator::apply(std::span<const int> args, int alphabet) const {
  require(static_cast<int>(args.size()) == arity, "operator arity mismatch");
  long idx = 0;
  for (int a : args) {
    require(a >= 0 && a < alphabet, "argument outside the alphabet");
    idx = idx * alphabet + a;
  }
  return table[static_cast<std::size_t>(idx)];
}

void CircuitFamily::validate() const {
  require(alphabet >= 1, "alphabet must be nonempty");
  for (const auto& op : ops) {
    require(op.arity >= 1, "unit operators must have arity >= 1");
    require(static_cast<long>(op.table.size()) == ipow(alphabet, op.arity),
            "operator table size mismatch");
    for (int v : op.table) require(v >= 0 && v < alphabet, "table value outside the alphabet");
  }
  for (const auto& [n, m] : members) {
    require(m.input_len >= 1, "member input length must be >= 1");
    int expect = m.input_len + 1;
    for (const auto& st : m.steps) {
      require(st.position == expect, "steps must cover consecutive output positions");
      require(st.op >= 0 && st.op < static_cast<int>(ops.size()), "unknown operator id");
      require(static_cast<int>(st.parents.size()) == ops[st.op].arity,
              "parent count must match operator arity");
      for (int p : st.parents) require(p >= 1 && p < st.position, "parent must precede the step");
      ++expect;
    }
  }
}

std::vector<int> eval_circuit_at(const CircuitFamily& f, int n, std::span<const int> x) {
  const auto it = f.members.find(n);
  require(it != f.members.end(), "length not defined by the family");
  const CircuitMember& m = it->second;
  require(static_cast<int>(x.size()) == m.input_len, "input length mismatch");
  std::vector<int> z(x.begin(), x.end());
  z.reserve(x.size() + m.steps.size());
  std::vector<int> args;
  for (const auto& st : m.steps) {
    args.clear();
    for (int p : st.parents) {
      require(p <= static_cast<int>(z.size()), "parent index ahead of the computation");
      args.push_back(z[p - 1]);
    }
    z.push_back(f.ops[st.op].apply(args, f.alphabet));
  }
  return {z.begin() + m.input_len, z.end()};
}

std::vector<int> eval_circuit(const CircuitFamily& f, std::span<const int> x) {
  int found = -1;
  for (const auto& [n, m] : f.members) {
    if (m.input_len == static_cast<int>(x.size())) {
      require(found == -1, "input length is ambiguous in this family; use eval_circuit_at");
      found = n;
    }
  }
  require(found != -1, "no family member with this input length");
  return eval_circuit_at(f, found, x);
}

std::string to_string(BuiltinKind k) {
  switch (k) {
    case BuiltinKind::parity: return "parity";
    case BuiltinKind::multiplication_1n: return "multiplication_1n";
    case BuiltinKind::example3_a: return "example3_a";
    case BuiltinKind::example3_b: return "example3_b";
    default: return "parity_aligned";
  }
}

BuiltinKind builtin_from_string(const std::string& s) {
  for (BuiltinKind k : {BuiltinKind::parity, BuiltinKind::multiplication_1n,
                        BuiltinKind::example3_a, BuiltinKind::example3_b,
                        BuiltinKind::parity_aligned})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown builtin circuit: " + s);
}

namespace {

UnitOperator make_op(std::string id, int arity, int alphabet,
                     const std::function<int(std::span<const int>)>& fn) {
  UnitOperator op;
  op.id = std::move(id);
  op.arity = arity;
  op.table.resize(ipow(alphabet, arity));
  std::vector<int> args(arity, 0);
  for (long idx = 0; idx < static_cast<long>(op.table.size()); ++idx) {
    long rest = idx;
    for (int a = arity - 1; a >= 0; --a) {
      args[a] = static_cast<int>(rest % alphabet);
      rest /= alphabet;
    }
    op.table[idx] = fn(args);
  }
  return op;
}

CircuitFamily parity_family(int n_max) {
  CircuitFamily f;
  f.alphabet = 2;
  f.ops.push_back(make_op("id", 1, 2, [](std::span<const int> a) { return a[0]; }));
  f.ops.push_back(make_op("xor", 2, 2, [](std::span<const int> a) { return a[0] ^ a[1]; }));
  for (int n = 1; n <= n_max; ++n) {
    CircuitMember m;
    m.input_len = n;
    m.steps.push_back({n + 1, 0, {1}});
    for (int i = 2; i <= n; ++i) m.steps.push_back({n + i, 1, {i, n + i - 1}});
    f.members[n] = std::move(m);
  }
  return f;
}

CircuitFamily multiplication_family(int n_max) {
  CircuitFamily f;
  f.alphabet = 10;
  // y_1 = x_1*x_2 mod 10; later digits add the incoming carry, reconstructed
  // from the previous output digit: a wrap happened iff it dropped below the
  // carry-free digit.
  f.ops.push_back(make_op("g1", 2, 10, [](std::span<const int> u) {
    return (u[0] * u[1]) % 10;
  }));
  f.ops.push_back(make_op("g2", 4, 10, [](std::span<const int> u) {
    const int lo = (u[0] * u[2]) % 10;
    const int carry = u[0] * u[1] / 10 + ((u[3] < (u[0] * u[1]) % 10) ? 1 : 0);
    return (lo + carry) % 10;
  }));
  f.ops.push_back(make_op("g3", 3, 10, [](std::span<const int> u) {
    return u[0] * u[1] / 10 + ((u[2] < (u[0] * u[1]) % 10) ? 1 : 0);
  }));
  for (int n = 2; n <= n_max; ++n) {
    CircuitMember m;
    m.input_len = n;
    m.steps.push_back({n + 1, 0, {1, 2}});
    for (int j = 2; j <= n - 1; ++j) m.steps.push_back({n + j, 1, {1, j, j + 1, n + j - 1}});
    m.steps.push_back({2 * n, 2, {1, n, 2 * n - 1}});
    f.members[n] = std::move(m);
  }
  return f;
}

CircuitFamily example3_family(bool variant_a, int n_max) {
  CircuitFamily f;
  f.alphabet = 10;
  f.ops.push_back(make_op("g1", 1, 10, [](std::span<const int> a) { return (a[0] + 1) % 10; }));
  f.ops.push_back(make_op("g2", 1, 10, [](std::span<const int> a) { return (a[0] + 2) % 10; }));
  for (int n = 1; n <= n_max; ++n) {
    CircuitMember m;
    m.input_len = n;
    if (n == 1) {
      m.steps.push_back({2, 0, {1}});
    } else if (variant_a) {
      // Chain of +1 steps, then one +2 step off the second-to-last chain
      // element (off the input directly when the chain has length one).
      m.steps.push_back({n + 1, 0, {1}});
      for (int k = 2; k <= n - 1; ++k) m.steps.push_back({n + k, 0, {n + k - 1}});
      m.steps.push_back({2 * n, 1, {n == 2 ? 1 : 2 * n - 2}});
    } else {
      m.steps.push_back({n + 1, 0, {1}});
      m.steps.push_back({n + 2, 1, {1}});
      for (int k = 3; k <= n; ++k) m.steps.push_back({n + k, 1, {n + k - 2}});
    }
    f.members[n] = std::move(m);
  }
  return f;
}

CircuitFamily parity_aligned_family(int n_max) {
  CircuitFamily f;
  f.alphabet = 3;  // {0, 1, separator}
  // A single operator handles both the first output (previous token is the
  // separator, which acts as the empty prefix) and the running xor.
  f.ops.push_back(make_op("xor_or_start", 2, 3, [](std::span<const int> a) {
    if (a[1] == 2) return a[0] == 2 ? 0 : a[0];
    if (a[0] == 2) return 0;
    return a[0] ^ a[1];
  }));
  const int N = n_max;
  for (int n = 1; n <= N; ++n) {
    CircuitMember m;
    m.input_len = N + 1;  // x_1..x_N and the separator
    for (int i = 1; i <= n; ++i) m.steps.push_back({N + 1 + i, 0, {i, N + i}});
    f.members[n] = std::move(m);
  }
  return f;
}

}  // namespace

CircuitFamily builtin_family(BuiltinKind kind, int n_max) {
  require(n_max >= 1, "n_max must be >= 1");
  CircuitFamily f;
  switch (kind) {
    case BuiltinKind::parity: f = parity_family(n_max); break;
    case BuiltinKind::multiplication_1n: f = multiplication_family(n_max); break;
    case BuiltinKind::example3_a: f = example3_family(true, n_max); break;
    case BuiltinKind::example3_b: f = example3_family(false, n_max); break;
    case BuiltinKind::parity_aligned: f = parity_aligned_family(n_max); break;
  }
  f.validate();
  return f;
}

int src_upper_bound(const CircuitFamily& f) {
  std::vector<int> used;  // extensionally distinct operators referenced by steps
  for (const auto& [n, m] : f.members) {
    for (const auto& st : m.steps) {
      bool found = false;
      for (int u : used)
        if (f.ops[u].same_table_as(f.ops[st.op])) {
          found = true;
          break;
        }
      if (!found) used.push_back(st.op);
    }
  }
  return static_cast<int>(used.size());
}

namespace {

// All operator tables with the given arity over the alphabet, encoded as the
// flat table vector.
std::vector<std::vector<int>> all_tables(int alphabet, int arity) {
  const long cells = ipow(alphabet, arity);
  const long count = ipow(alphabet, static_cast<int>(cells));
  std::vector<std::vector<int>> out;
  out.reserve(count);
  std::vector<int> t(cells, 0);
  for (long k = 0; k < count; ++k) {
    out.push_back(t);
    for (long c = 0; c < cells; ++c) {
      if (++t[c] < alphabet) break;
      t[c] = 0;
    }
  }
  return out;
}

}  // namespace

std::optional<int> src_bruteforce(
    const std::function<std::vector<int>(const std::vector<int>&)>& oracle, int alphabet,
    int n_max, int arity_max, int ops_max) {
  if (alphabet > 3 || n_max > 3 || arity_max > 2 || ops_max > 3)
    throw BoundsExceededError("src_bruteforce guards exceeded");
  require(alphabet >= 1 && n_max >= 1 && arity_max >= 1 && ops_max >= 1,
          "src_bruteforce: bounds must be positive");

  // z-sequences (input ++ output) for every input, grouped by length.
  struct Position {
    std::vector<std::vector<int>> zs;  // all z sequences of this length
    int index = 0;                     // the position this entry constrains
  };
  std::vector<Position> positions;
  for (int n = 1; n <= n_max; ++n) {
    std::vector<std::vector<int>> zs;
    std::vector<int> x(n, 0);
    long m = -1;
    for (long k = 0; k < ipow(alphabet, n); ++k) {
      long rest = k;
      for (int a = 0; a < n; ++a) {
        x[a] = static_cast<int>(rest % alphabet);
        rest /= alphabet;
      }
      auto y = oracle(x);
      if (m == -1) m = static_cast<long>(y.size());
      if (m != static_cast<long>(y.size())) return std::nullopt;  // no fixed m(n)
      std::vector<int> z = x;
      z.insert(z.end(), y.begin(), y.end());
      zs.push_back(std::move(z));
    }
    for (long i = n + 1; i <= n + m; ++i)
      positions.push_back({zs, static_cast<int>(i)});
  }
  if (positions.empty()) return 0;

  // Candidate tables are shared across arities via a (arity, table) encoding.
  struct Cand {
    int arity;
    std::vector<int> table;
  };
  std::vector<Cand> cands;
  for (int a = 1; a <= arity_max; ++a)
    for (auto& t : all_tables(alphabet, a)) cands.push_back({a, std::move(t)});

  auto feasible = [&](const Cand& g, const Position& pos) {
    const int i = pos.index;
    std::vector<int> tuple(g.arity, 1);
    for (;;) {
      bool ok = true;
      for (const auto& z : pos.zs) {
        long idx = 0;
        for (int p : tuple) idx = idx * alphabet + z[p - 1];
        if (g.table[idx] != z[i - 1]) {
          ok = false;
          break;
        }
      }
      if (ok) return true;
      int a = g.arity - 1;
      while (a >= 0 && ++tuple[a] >= i) tuple[a--] = 1;
      if (a < 0) return false;
    }
  };

  // Feasible candidate sets per position.
  std::vector<std::vector<int>> feas(positions.size());
  for (std::size_t p = 0; p < positions.size(); ++p) {
    for (std::size_t c = 0; c < cands.size(); ++c)
      if (feasible(cands[c], positions[p])) feas[p].push_back(static_cast<int>(c));
    if (feas[p].empty()) return std::nullopt;
  }

  // Exact minimal hitting set, branching on the uncovered position with the
  // fewest options.
  std::function<bool(std::vector<int>&, int)> solve = [&](std::vector<int>& chosen,
                                                          int budget) -> bool {
    int best = -1;
    std::size_t best_size = 0;
    for (std::size_t p = 0; p < positions.size(); ++p) {
      bool covered = false;
      for (int c : chosen)
        if (std::find(feas[p].begin(), feas[p].end(), c) != feas[p].end()) {
          covered = true;
          break;
        }
      if (!covered && (best == -1 || feas[p].size() < best_size)) {
        best = static_cast<int>(p);
        best_size = feas[p].size();
      }
    }
    if (best == -1) return true;
    if (budget == 0) return false;
    for (int c : feas[best]) {
      chosen.push_back(c);
      if (solve(chosen, budget - 1)) return true;
      chosen.pop_back();
    }
    return false;
  };

  for (int k = 1; k <= ops_max; ++k) {
    std::vector<int> chosen;
    if (solve(chosen, k)) return k;
  }
  return std::nullopt;
}

namespace {

// Shared characterization walk for plain and scale-hinted PRFs; `value`
// receives the already-converted 0-based (query, key) pair plus the member
// index.
CharacterizationReport check_impl(const CircuitFamily& f, int n_max,
                                  const std::function<int(int, int, int)>& value) {
  CharacterizationReport rep;
  constexpr std::size_t kMaxCounterexamples = 16;

  // Extensional operator identity: Definition-6 consistency compares
  // operators as functions.
  std::vector<int> ext_id(f.ops.size());
  for (std::size_t a = 0; a < f.ops.size(); ++a) {
    ext_id[a] = static_cast<int>(a);
    for (std::size_t b = 0; b < a; ++b)
      if (f.ops[b].same_table_as(f.ops[a])) {
        ext_id[a] = ext_id[b];
        break;
      }
  }

  struct SlotRole {
    int op_ext = 0;
    int slot = 0;
    RoleRef ref;
  };
  std::map<int, SlotRole> slot_value_role;  // PRF value -> first slot seen
  std::set<std::pair<int, int>> parent_pairs;  // (i, j) a parent edge at any scale

  auto role_name = [&](const CircuitStep& st, int slot) {
    return f.ops[st.op].id + ":" + std::to_string(slot);
  };

  for (const auto& [n, m] : f.members) {
    if (n > n_max) continue;
    for (const auto& st : m.steps)
      for (int j : st.parents) parent_pairs.insert({st.position, j});
  }

  // Consistency over parent-edge slots.
  for (const auto& [n, m] : f.members) {
    if (n > n_max) continue;
    for (const auto& st : m.steps) {
      for (std::size_t k = 0; k < st.parents.size(); ++k) {
        const int j = st.parents[k];
        // Duplicate parents keep their first slot, matching I^{-1}.
        if (std::find(st.parents.begin(), st.parents.begin() + k, j) !=
            st.parents.begin() + k)
          continue;
        const int v = value(st.position - 2, j - 1, n);
        const int slot = static_cast<int>(k) + 1;
        RoleRef ref{n, st.position, j, role_name(st, slot)};
        auto it = slot_value_role.find(v);
        if (it == slot_value_role.end()) {
          slot_value_role.emplace(v, SlotRole{ext_id[st.op], slot, ref});
        } else if (it->second.op_ext != ext_id[st.op] || it->second.slot != slot) {
          rep.consistent = false;
          if (rep.counterexamples.size() < kMaxCounterexamples)
            rep.counterexamples.push_back({"consistency", v, it->second.ref, ref});
        }
      }
    }
  }

  // Distinctness: keys that are never a parent of the emitting step, at
  // queries that emit some step, must not reuse a slot value.
  for (const auto& [n, m] : f.members) {
    if (n > n_max) continue;
    for (const auto& st : m.steps) {
      for (int j = 1; j < st.position; ++j) {
        if (parent_pairs.count({st.position, j})) continue;
        const int v = value(st.position - 2, j - 1, n);
        auto it = slot_value_role.find(v);
        if (it != slot_value_role.end()) {
          rep.distinct = false;
          if (rep.counterexamples.size() < kMaxCounterexamples)
            rep.counterexamples.push_back(
                {"distinctness", v, it->second.ref, RoleRef{n, st.position, j, "none"}});
        }
      }
    }
  }
  return rep;
}

CoverageReport coverage_impl(const CircuitFamily& f, int n_train, int n_test,
                             const std::function<int(int, int, int)>& value) {
  if (n_train > n_test) throw std::invalid_argument("n_train must not exceed n_test");
  auto values_up_to = [&](int n_hi) {
    std::set<int> vals;
    for (const auto& [n, m] : f.members) {
      if (n > n_hi) continue;
      for (const auto& st : m.steps)
        for (int j : st.parents) vals.insert(value(st.position - 2, j - 1, n));
    }
    return vals;
  };
  const auto train_vals = values_up_to(n_train);
  const auto test_vals = values_up_to(n_test);
  CoverageReport rep;
  for (int v : test_vals)
    if (!train_vals.count(v)) rep.novel_values.insert(v);
  rep.covered = rep.novel_values.empty();
  return rep;
}

}  // namespace

CharacterizationReport check_prf_characterizes(const Prf& prf, const CircuitFamily& f,
                                               int n_max) {
  return check_impl(f, n_max, [&prf](int q, int k, int) { return prf(q, k); });
}

CharacterizationReport check_prf_characterizes(const PrfSh& prf, const CircuitFamily& f,
                                               int n_max) {
  return check_impl(f, n_max, [&prf](int q, int k, int n) { return prf(q, k, n); });
}

CoverageReport check_value_coverage(const Prf& prf, const CircuitFamily& f, int n_train,
                                    int n_test) {
  return coverage_impl(f, n_train, n_test, [&prf](int q, int k, int) { return prf(q, k); });
}

CoverageReport check_value_coverage(const PrfSh& prf, const CircuitFamily& f, int n_train,
                                    int n_test) {
  return coverage_impl(f, n_train, n_test, [&prf](int q, int k, int n) { return prf(q, k, n); });
}

PrfSh build_prfsh(const CircuitFamily& f) {
  // Operator slots get consecutive value blocks; dedupe extensionally equal
  // operators so equal functions share a block.
  std::vector<int> block_of(f.ops.size(), -1);
  std::vector<int> arities;
  for (std::size_t a = 0; a < f.ops.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b)
      if (f.ops[b].same_table_as(f.ops[a])) {
        block_of[a] = block_of[b];
        break;
      }
    if (block_of[a] == -1) {
      block_of[a] = static_cast<int>(arities.size());
      arities.push_back(f.ops[a].arity);
    }
  }
  std::vector<int> offset(arities.size(), 0);
  int total = 0;
  for (std::size_t k = 0; k < arities.size(); ++k) {
    offset[k] = total;
    total += arities[k];
  }
  const int catch_all = total + 1;  // one past the slot values, never colliding

  // Index parent edges once: (n, position, key) -> value.
  auto edges = std::make_shared<std::map<std::tuple<int, int, int>, int>>();
  for (const auto& [n, m] : f.members) {
    for (const auto& st : m.steps) {
      for (std::size_t k = 0; k < st.parents.size(); ++k) {
        const int j = st.parents[k];
        edges->try_emplace({n, st.position, j},
                           offset[block_of[st.op]] + static_cast<int>(k) + 1);
      }
    }
  }

  // Pre-shifted by one query position so the characterization check, which
  // evaluates the PRF at the token before each step, lands on the step's own
  // tuple.
  return {"prfsh:" + std::to_string(total), catch_all,
          [edges, catch_all](int q, int k, int n) {
            const auto it = edges->find({n, q + 2, k + 1});
            return it == edges->end() ? catch_all : it->second;
          }};
}

nlohmann::json CircuitFamily::to_json() const {
  nlohmann::json j;
  j["alphabet"] = alphabet;
  auto& jops = j["operators"] = nlohmann::json::array();
  for (const auto& op : ops)
    jops.push_back({{"id", op.id}, {"arity", op.arity}, {"table", op.table}});
  auto& jm = j["members"] = nlohmann::json::object();
  for (const auto& [n, m] : members) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& st : m.steps)
      steps.push_back({{"position", st.position}, {"op", st.op}, {"parents", st.parents}});
    jm[std::to_string(n)] = {{"input_len", m.input_len}, {"steps", std::move(steps)}};
  }
  return j;
}

CircuitFamily CircuitFamily::from_json(const nlohmann::json& j) {
  CircuitFamily f;
  f.alphabet = j.at("alphabet").get<int>();
  for (const auto& jop : j.at("operators")) {
    UnitOperator op;
    op.id = jop.at("id").get<std::string>();
    op.arity = jop.at("arity").get<int>();
    op.table = jop.at("table").get<std::vector<int>>();
    f.ops.push_back(std::move(op));
  }
  for (const auto& [key, jm] : j.at("members").items()) {
    CircuitMember m;
    m.input_len = jm.at("input_len").get<int>();
    for (const auto& js : jm.at("steps")) {
      CircuitStep st;
      st.position = js.at("position").get<int>();
      st.op = js.at("op").get<int>();
      st.parents = js.at("parents").get<std::vector<int>>();
      m.steps.push_back(std::move(st));
    }
    f.members[std::stoi(key)] = std::move(m);
  }
  f.validate();
  return f;
}

}  // namespace lglab::circ
