#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lglab/prf.hpp"

// Circuit representations of sequential computation: per-length step lists
// over a shared unit-operator set, evaluated left to right. Positions are
// 1-based as in the matrix modules.
namespace lglab::circ {

struct BoundsExceededError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Total operator table over Sigma^arity. Inputs index the flat table in
// mixed radix, first argument most significant.
struct UnitOperator {
  std::string id;
  int arity = 0;
  std::vector<int> table;  // size |Sigma|^arity

  int apply(std::span<const int> args, int alphabet) const;
  bool same_table_as(const UnitOperator& o) const {
    return arity == o.arity && table == o.table;
  }
};

struct CircuitStep {
  int position = 0;
  int op = 0;                // index into CircuitFamily::ops
  std::vector<int> parents;  // positions < position, slot order significant
};

// One family member. input_len is the token count the member consumes; for
// the plain constructions it equals the family index, for the aligned ones
// it is fixed across indices.
struct CircuitMember {
  int input_len = 0;
  std::vector<CircuitStep> steps;  // cover input_len+1 .. input_len+steps.size()
};

struct CircuitFamily {
  int alphabet = 0;
  std::vector<UnitOperator> ops;
  std::map<int, CircuitMember> members;  // keyed by family index n

  void validate() const;
  nlohmann::json to_json() const;
  static CircuitFamily from_json(const nlohmann::json& j);
};

// Sequential evaluation. The span overload resolves the member by input
// length and requires it to be unique; eval_circuit_at takes the index
// explicitly (needed for aligned families, whose input length is constant).
std::vector<int> eval_circuit(const CircuitFamily& f, std::span<const int> x);
std::vector<int> eval_circuit_at(const CircuitFamily& f, int n, std::span<const int> x);

enum class BuiltinKind {
  parity,             // y_i = x_i xor y_{i-1}, operators {g_ID, g_xor}
  multiplication_1n,  // single digit times reversed-digit number, {g1,g2,g3}
  example3_a,         // (x_1+k) mod 10 via a g1-chain ending in g2
  example3_b,         // same mapping, alternating wiring
  parity_aligned,     // parity in aligned data coordinates (separator token)
};

BuiltinKind builtin_from_string(const std::string& s);
std::string to_string(BuiltinKind k);

// parity_aligned takes n_max as the alignment target: member n holds the
// steps that produce y_1..y_n inside the fixed-length layout
// x_1..x_N  sep  y_1..y_N.
CircuitFamily builtin_family(BuiltinKind kind, int n_max);

// |G| restricted to operators actually referenced by some step.
int src_upper_bound(const CircuitFamily& f);

// Exhaustive search over operator tables and wirings for a minimal family
// matching the oracle on every input up to n_max. Guarded: |Sigma| <= 3,
// n_max <= 3, arity_max <= 2, ops_max <= 3.
std::optional<int> src_bruteforce(
    const std::function<std::vector<int>(const std::vector<int>&)>& oracle, int alphabet,
    int n_max, int arity_max, int ops_max);

struct RoleRef {
  int member = 0;    // family index n
  int position = 0;  // step position i
  int parent = 0;    // key position j (0 when the pair is not a parent edge)
  std::string role;  // "op:slot" or "none"
};

struct Counterexample {
  std::string kind;  // "consistency" or "distinctness"
  int value = 0;     // shared PRF value
  RoleRef a, b;
};

struct CharacterizationReport {
  bool consistent = true;
  bool distinct = true;
  std::vector<Counterexample> counterexamples;
  bool ok() const { return consistent && distinct; }
};

// Definition-6 style check. Pair (i, j) of a step and a parent is looked up
// in the PRF at the 0-based query/key pair (i-2, j-1): the query offset is
// the i-1 shift applied in circuit coordinates, then both coordinates drop
// to the PRF's 0-based convention. Distinctness compares parent edges
// against non-parent keys under queries that emit some step.
CharacterizationReport check_prf_characterizes(const Prf& prf, const CircuitFamily& f, int n_max);
CharacterizationReport check_prf_characterizes(const PrfSh& prf, const CircuitFamily& f, int n_max);

struct CoverageReport {
  bool covered = true;
  std::set<int> novel_values;
};

// PRF values on parent edges at scales <= n_train versus <= n_test; covered
// when testing introduces no new value. Characterization plus coverage
// jointly predict length generalization.
CoverageReport check_value_coverage(const Prf& prf, const CircuitFamily& f, int n_train, int n_test);
CoverageReport check_value_coverage(const PrfSh& prf, const CircuitFamily& f, int n_train, int n_test);

// Constructive scale-hinted PRF: slot k of operator g_{k'} maps to
// sum_{k<k'} arity_k + slot, everything else to the catch-all value
// sum_k arity_k + 1. The returned function is pre-shifted so that the
// checker's query offset lands on the right tuple.
PrfSh build_prfsh(const CircuitFamily& f);

}  // namespace lglab::circ
