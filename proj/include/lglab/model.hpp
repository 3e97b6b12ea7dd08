#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lglab/pe.hpp"
#include "lglab/prf.hpp"
#include "lglab/tasks.hpp"

// Decoder-only transformer at desk scale, double precision, handwritten
// backward pass. The PE hook covers every realization in the project:
// GPT-2-style absolute embeddings added at the input (ape), key-only
// additive tables driven by a PRF (rpe / ipe / ipe_sh), and learning-based
// tables whose PRF is itself a parameterized simplex map (lbpe / lbpe_sh).
namespace lglab::nn {

struct TrainDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PeKind { ape, rpe, ipe, ipe_sh, lbpe, lbpe_sh };

std::string to_string(PeKind k);
PeKind pe_from_string(const std::string& s);
bool pe_needs_scale_hint(PeKind k);

struct ModelConfig {
  int layers = 2;
  int heads = 1;
  int dim = 128;
  PeKind pe = PeKind::rpe;
  tasks::TaskKind pe_task = tasks::TaskKind::copy;  // selects the ipe table
  int s_max = 128;       // relation-value count for the learning-based kinds
  int max_len = 64;      // longest sequence the model accepts
  int target_length = 0; // aligned N; parameterizes the ipe table
  int vocab = tasks::vocab_size();
  int lbpe_hidden = 32;
  int lbpe_freqs = 6;
  // Freeze the learnable PRF to the exact one-hot ipe table; used to
  // cross-check that the lbpe path reproduces the additive path bit for bit.
  bool lbpe_frozen_ipe = false;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct TrainConfig {
  int batch = 1024;  // effective batch, reached via gradient accumulation
  int micro_batch = 16;
  int epochs = 100;
  double lr = 5e-4;
  double weight_decay = 1.0;
  double warmup_ratio = 0.05;  // cosine schedule after linear warmup
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // optimizer steps; 0 = final checkpoint only
  bool snapshot_params = true;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Metrics {
  long step = 0;
  std::vector<int> scales;
  std::vector<double> accuracy;  // exact-match per scale, in [0,1]

  double mean() const;
};

struct Checkpoint {
  long step = 0;
  Metrics metrics;
  std::vector<double> params;  // empty unless snapshots were requested
};

// Offsets of every parameter tensor inside the flat buffer.
struct ParamLayout {
  struct Block {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t pe_table;    // pe_rows x C (table kinds)
    std::size_t lbpe_theta;  // learnable-PRF parameters (lbpe kinds)
    std::size_t ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };
  std::size_t wte = 0, wpe = 0;
  std::vector<Block> blocks;
  std::size_t lnf_g = 0, lnf_b = 0, head_w = 0;
  std::size_t total = 0;
  int pe_rows = 0;
  int lbpe_theta_size = 0;
};

struct Model {
  ModelConfig cfg;
  ParamLayout layout;
  std::vector<double> params;
  std::vector<std::uint8_t> decay_mask;  // 1 where weight decay applies

  // PRF machinery derived from cfg; immutable after construction.
  Prf table_prf;          // rpe / ipe
  PrfSh table_prf_sh;     // ipe_sh
  LearnablePrf lbpe_arch; // architecture only; theta lives in params

  bool uses_pe_table() const { return cfg.pe != PeKind::ape; }
  bool uses_lbpe() const { return cfg.pe == PeKind::lbpe || cfg.pe == PeKind::lbpe_sh; }
};

Model make_model(const ModelConfig& cfg, std::uint64_t seed);

// Forward pass for one sequence; returns row-major [T x vocab] logits.
// scale_hint is required by the scale-hinted PE kinds and ignored otherwise.
std::vector<double> forward_logits(const Model& m, std::span<const int> tokens, int scale_hint = 0);

// Softmax of forward_logits, one next-token distribution per position.
std::vector<double> next_token_distributions(const Model& m, std::span<const int> tokens,
                                             int scale_hint = 0);

// Attention probabilities [layers][heads*T*T] for inspection in tests.
std::vector<std::vector<double>> attention_probes(const Model& m, std::span<const int> tokens,
                                                  int scale_hint = 0);

// Mean cross entropy over answer-region tokens of the batch, with gradients
// accumulated into grad (sized layout.total, caller-zeroed).
double loss_and_grad(const Model& m, std::span<const tasks::TaskInstance> batch,
                     std::span<double> grad);

struct EvalSpec {
  tasks::TaskKind task = tasks::TaskKind::copy;
  bool aligned = false;
  int target_length = 0;
  std::vector<int> scales;
  int samples_per_scale = 200;
  std::uint64_t seed = 0;
};

// Exact-match accuracy per scale under greedy decoding. Implemented as a
// single teacher-forced pass per instance: greedy decoding reproduces the
// reference answer exactly when every answer-position argmax matches it, so
// the two give identical exact-match results (asserted in the tests).
Metrics evaluate_per_scale(const Model& m, const EvalSpec& spec);

// Literal greedy decoding, used by the CLI and to cross-check the evaluator.
std::vector<int> greedy_decode(const Model& m, std::span<const int> prompt, int answer_len,
                               int scale_hint = 0);

using EvalFn = std::function<Metrics(const Model&)>;

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<double> loss_trace;  // one entry per optimizer step
  long steps = 0;
};

TrainResult train(Model& m, const TrainConfig& tc, const std::vector<tasks::TaskInstance>& data,
                  const EvalFn& eval_fn);

const Checkpoint& select_best_checkpoint(const std::vector<Checkpoint>& cps);

void save_checkpoint(const std::string& path_prefix, const Model& m, const Checkpoint& cp);
Model load_checkpoint(const std::string& path_prefix, Checkpoint* cp_out = nullptr);

}  // namespace lglab::nn
