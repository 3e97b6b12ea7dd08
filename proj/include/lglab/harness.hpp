#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lglab/model.hpp"
#include "lglab/tasks.hpp"

// Experiment orchestration: one declarative config fans out into
// (pe, seed) runs, each persisted as a JSON record keyed by the config
// digest. Re-running skips completed pairs; a failed run is recorded and
// never aborts its siblings.
namespace lglab::harness {

// Results root comes from this environment variable when set.
inline constexpr const char* kResultsEnv = "LGLAB_RESULTS_DIR";
std::string results_root();

struct ExperimentConfig {
  std::string name = "experiment";
  tasks::TaskKind task = tasks::TaskKind::copy;
  std::vector<nn::PeKind> pes;
  bool aligned = true;
  int target_length = 10;
  int train_scale_lo = 1, train_scale_hi = 5;
  std::vector<int> eval_scales;
  std::vector<std::uint64_t> seeds;
  int train_examples = 2048;
  int eval_samples_per_scale = 200;
  std::uint64_t data_seed = 12345;
  nn::ModelConfig model;
  nn::TrainConfig train;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // FNV-1a over the canonical (sorted-key, whitespace-free) serialization.
  std::string digest() const;
  std::vector<int> extrapolation_scales() const;  // eval scales above the train range
};

struct RunRecord {
  std::string run_id;
  std::string config_digest;
  tasks::TaskKind task = tasks::TaskKind::copy;
  std::string pe;
  std::uint64_t seed = 0;
  std::vector<nn::Metrics> checkpoints;
  int selected = -1;  // index into checkpoints
  double wall_clock_s = 0.0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
  const nn::Metrics& selected_metrics() const;
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

// Trains and evaluates every (pe, seed) pair, persisting records (and the
// selected checkpoint blob) under <root>/<digest>/. Completed records are
// loaded instead of re-run.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::string& root);

struct TrendReport {
  std::vector<int> scales;                 // extrapolation scales used
  std::map<std::string, double> mean_acc;  // per PE, mean over scales x seeds
  std::vector<std::string> ordering;       // PEs sorted by mean, best first
  struct Gap {
    std::string better, worse;
    double gap;
  };
  std::vector<Gap> gaps;
  bool tied = false;

  nlohmann::json to_json() const;
};

TrendReport compare_trends(const std::vector<RunRecord>& records,
                           const std::vector<int>& extrapolation_scales);

// CSV schema: run_id,task,pe,seed,scale,accuracy,checkpoint_step with the
// selected checkpoint's per-scale accuracies.
void export_csv(const std::vector<RunRecord>& records, const std::string& path);

struct CsvRow {
  std::string run_id, task, pe;
  std::uint64_t seed;
  int scale;
  double accuracy;
  long checkpoint_step;
};
std::vector<CsvRow> import_csv(const std::string& path);

void export_json(const std::vector<RunRecord>& records, const std::string& path);

// Accuracy-vs-scale polyline chart, one series per PE (seed-averaged).
void export_svg_linechart(const std::vector<RunRecord>& records, const std::string& path);

// Top-k relation values per (query, key) cell of a trained learnable PRF.
void export_prf_heatmap(const nn::Model& model, int n, int top_k, const std::string& path);

}  // namespace lglab::harness
