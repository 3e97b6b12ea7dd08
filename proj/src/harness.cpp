#include "lglab/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lglab::harness {

namespace fs = std::filesystem;

std::string results_root() {
  if (const char* env = std::getenv(kResultsEnv)) return env;
  return "results";
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["task"] = tasks::to_string(task);
  auto& jp = j["pes"] = nlohmann::json::array();
  for (auto pe : pes) jp.push_back(nn::to_string(pe));
  j["aligned"] = aligned;
  j["target_length"] = target_length;
  j["train_scales"] = {train_scale_lo, train_scale_hi};
  j["eval_scales"] = eval_scales;
  j["seeds"] = seeds;
  j["train_examples"] = train_examples;
  j["eval_samples_per_scale"] = eval_samples_per_scale;
  j["data_seed"] = data_seed;
  j["model"] = model.to_json();
  j["train"] = train.to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.task = tasks::task_from_string(j.at("task").get<std::string>());
  for (const auto& pe : j.at("pes")) c.pes.push_back(nn::pe_from_string(pe.get<std::string>()));
  c.aligned = j.value("aligned", c.aligned);
  c.target_length = j.value("target_length", c.target_length);
  if (j.contains("train_scales")) {
    c.train_scale_lo = j.at("train_scales").at(0).get<int>();
    c.train_scale_hi = j.at("train_scales").at(1).get<int>();
  }
  c.eval_scales = j.at("eval_scales").get<std::vector<int>>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.train_examples = j.value("train_examples", c.train_examples);
  c.eval_samples_per_scale = j.value("eval_samples_per_scale", c.eval_samples_per_scale);
  c.data_seed = j.value("data_seed", c.data_seed);
  if (j.contains("model")) c.model = nn::ModelConfig::from_json(j.at("model"));
  if (j.contains("train")) c.train = nn::TrainConfig::from_json(j.at("train"));
  return c;
}

std::string ExperimentConfig::digest() const {
  // nlohmann::json objects keep keys sorted, so dump() is canonical under
  // field reordering.
  const std::string canon = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::vector<int> ExperimentConfig::extrapolation_scales() const {
  std::vector<int> out;
  for (int s : eval_scales)
    if (s > train_scale_hi) out.push_back(s);
  return out;
}

const nn::Metrics& RunRecord::selected_metrics() const {
  if (selected < 0 || selected >= static_cast<int>(checkpoints.size()))
    throw std::runtime_error("run " + run_id + " has no selected checkpoint");
  return checkpoints[selected];
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["run_id"] = run_id;
  j["config_digest"] = config_digest;
  j["task"] = tasks::to_string(task);
  j["pe"] = pe;
  j["seed"] = seed;
  auto& jc = j["checkpoints"] = nlohmann::json::array();
  for (const auto& m : checkpoints)
    jc.push_back({{"step", m.step}, {"scales", m.scales}, {"accuracy", m.accuracy}});
  j["selected"] = selected;
  j["wall_clock_s"] = wall_clock_s;
  j["error"] = error;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.task = tasks::task_from_string(j.at("task").get<std::string>());
  r.pe = j.at("pe").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& jc : j.at("checkpoints")) {
    nn::Metrics m;
    m.step = jc.at("step").get<long>();
    m.scales = jc.at("scales").get<std::vector<int>>();
    m.accuracy = jc.at("accuracy").get<std::vector<double>>();
    r.checkpoints.push_back(std::move(m));
  }
  r.selected = j.at("selected").get<int>();
  r.wall_clock_s = j.at("wall_clock_s").get<double>();
  r.error = j.at("error").get<std::string>();
  return r;
}

namespace {

// Concurrent workers never interleave partial files.
void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    f << content;
  }
  fs::rename(tmp, path);
}

RunRecord execute_run(const ExperimentConfig& cfg, nn::PeKind pe, std::uint64_t seed,
                      const fs::path& dir) {
  RunRecord rec;
  rec.config_digest = cfg.digest();
  rec.task = cfg.task;
  rec.pe = nn::to_string(pe);
  rec.seed = seed;
  rec.run_id = rec.config_digest + "-" + rec.pe + "-s" + std::to_string(seed);
  const auto started = std::chrono::steady_clock::now();
  try {
    nn::ModelConfig mc = cfg.model;
    mc.pe = pe;
    mc.pe_task = cfg.task;
    mc.target_length = cfg.target_length;
    // Scale-hinted kinds train on the unaligned format.
    const bool aligned = cfg.aligned && !nn::pe_needs_scale_hint(pe);

    auto data = tasks::sample_dataset(cfg.task, cfg.train_scale_lo, cfg.train_scale_hi,
                                      cfg.train_examples, aligned, cfg.target_length,
                                      cfg.data_seed);
    nn::Model model = nn::make_model(mc, seed);

    nn::EvalSpec espec;
    espec.task = cfg.task;
    espec.aligned = aligned;
    espec.target_length = cfg.target_length;
    espec.scales = cfg.eval_scales;
    espec.samples_per_scale = cfg.eval_samples_per_scale;
    espec.seed = cfg.data_seed ^ 0x5eedULL;

    nn::TrainConfig tc = cfg.train;
    tc.seed = seed;
    auto result = nn::train(model, tc, data,
                            [&](const nn::Model& m) { return nn::evaluate_per_scale(m, espec); });

    const auto& best = nn::select_best_checkpoint(result.checkpoints);
    for (const auto& cp : result.checkpoints) rec.checkpoints.push_back(cp.metrics);
    for (std::size_t i = 0; i < result.checkpoints.size(); ++i)
      if (&result.checkpoints[i] == &best) rec.selected = static_cast<int>(i);

    if (!best.params.empty()) {
      nn::Model snapshot = model;
      snapshot.params = best.params;
      nn::save_checkpoint((dir / (rec.pe + "_s" + std::to_string(seed))).string(), snapshot, best);
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  rec.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::string& root) {
  if (cfg.pes.empty() || cfg.seeds.empty())
    throw std::invalid_argument("experiment needs at least one pe and one seed");
  for (int s : cfg.eval_scales)
    if (s < cfg.train_scale_lo)
      throw std::invalid_argument("eval range must contain the train range");

  const fs::path dir = fs::path(root) / cfg.digest();
  fs::create_directories(dir);
  write_atomically(dir / "config.json", cfg.to_json().dump(2) + "\n");

  struct Slot {
    nn::PeKind pe;
    std::uint64_t seed;
    fs::path record_path;
    bool done = false;
    RunRecord rec;
  };
  std::vector<Slot> slots;
  for (auto pe : cfg.pes)
    for (auto seed : cfg.seeds) {
      Slot s;
      s.pe = pe;
      s.seed = seed;
      s.record_path = dir / (nn::to_string(pe) + "_s" + std::to_string(seed) + ".json");
      slots.push_back(std::move(s));
    }

  // Idempotence: load completed records instead of re-running; records that
  // previously errored are attempted again.
  for (auto& s : slots) {
    if (!fs::exists(s.record_path)) continue;
    try {
      std::ifstream f(s.record_path);
      nlohmann::json j;
      f >> j;
      RunRecord r = RunRecord::from_json(j);
      if (r.ok()) {
        s.rec = std::move(r);
        s.done = true;
      }
    } catch (const std::exception&) {
      // Unreadable record: treat as not done.
    }
  }

  // Worker pool over independent runs; training inside each worker stays
  // single-threaded because nested parallel regions serialize.
  const int count = static_cast<int>(slots.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    if (slots[i].done) continue;
    slots[i].rec = execute_run(cfg, slots[i].pe, slots[i].seed, dir);
    write_atomically(slots[i].record_path, slots[i].rec.to_json().dump(2) + "\n");
  }

  std::vector<RunRecord> records;
  records.reserve(slots.size());
  for (auto& s : slots) records.push_back(std::move(s.rec));
  return records;
}

TrendReport compare_trends(const std::vector<RunRecord>& records,
                           const std::vector<int>& extrapolation_scales) {
  TrendReport rep;
  rep.scales = extrapolation_scales;
  if (records.empty()) return rep;
  for (const auto& r : records)
    if (r.task != records.front().task)
      throw std::invalid_argument("compare_trends: records mix tasks");

  std::map<std::string, std::pair<double, long>> acc;  // pe -> (sum, count)
  for (const auto& r : records) {
    if (!r.ok()) continue;
    const auto& m = r.selected_metrics();
    for (std::size_t k = 0; k < m.scales.size(); ++k) {
      if (std::find(extrapolation_scales.begin(), extrapolation_scales.end(), m.scales[k]) ==
          extrapolation_scales.end())
        continue;
      auto& slot = acc[r.pe];
      slot.first += m.accuracy[k];
      slot.second += 1;
    }
  }
  for (const auto& [pe, sc] : acc)
    rep.mean_acc[pe] = sc.second > 0 ? sc.first / static_cast<double>(sc.second) : 0.0;

  for (const auto& [pe, v] : rep.mean_acc) rep.ordering.push_back(pe);
  std::sort(rep.ordering.begin(), rep.ordering.end(), [&](const auto& a, const auto& b) {
    if (rep.mean_acc.at(a) != rep.mean_acc.at(b)) return rep.mean_acc.at(a) > rep.mean_acc.at(b);
    return a < b;
  });
  rep.tied = true;
  for (std::size_t i = 0; i < rep.ordering.size(); ++i)
    for (std::size_t k = i + 1; k < rep.ordering.size(); ++k) {
      const double gap =
          rep.mean_acc.at(rep.ordering[i]) - rep.mean_acc.at(rep.ordering[k]);
      rep.gaps.push_back({rep.ordering[i], rep.ordering[k], gap});
      if (gap != 0.0) rep.tied = false;
    }
  return rep;
}

nlohmann::json TrendReport::to_json() const {
  nlohmann::json j;
  j["extrapolation_scales"] = scales;
  j["mean_accuracy"] = mean_acc;
  j["ordering"] = ordering;
  j["gaps"] = nlohmann::json::array();
  for (const auto& g : gaps)
    j["gaps"].push_back({{"better", g.better}, {"worse", g.worse}, {"gap", g.gap}});
  j["tied"] = tied;
  return j;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void export_csv(const std::vector<RunRecord>& records, const std::string& path) {
  std::ostringstream os;
  os << "run_id,task,pe,seed,scale,accuracy,checkpoint_step\n";
  for (const auto& r : records) {
    if (!r.ok()) continue;
    const auto& m = r.selected_metrics();
    for (std::size_t k = 0; k < m.scales.size(); ++k)
      os << r.run_id << ',' << tasks::to_string(r.task) << ',' << r.pe << ',' << r.seed << ','
         << m.scales[k] << ',' << format_double(m.accuracy[k]) << ',' << m.step << "\n";
  }
  write_atomically(path, os.str());
}

std::vector<CsvRow> import_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<CsvRow> rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    CsvRow row;
    std::getline(ls, row.run_id, ',');
    std::getline(ls, row.task, ',');
    std::getline(ls, row.pe, ',');
    std::getline(ls, field, ',');
    row.seed = std::stoull(field);
    std::getline(ls, field, ',');
    row.scale = std::stoi(field);
    std::getline(ls, field, ',');
    row.accuracy = std::stod(field);
    std::getline(ls, field, ',');
    row.checkpoint_step = std::stol(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_json(const std::vector<RunRecord>& records, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) j.push_back(r.to_json());
  write_atomically(path, j.dump(2) + "\n");
}

namespace {

const char* series_color(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf"};
  return colors[i % 7];
}

}  // namespace

void export_svg_linechart(const std::vector<RunRecord>& records, const std::string& path) {
  // Seed-averaged accuracy per scale, one polyline per PE.
  std::map<std::string, std::map<int, std::pair<double, int>>> series;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    const auto& m = r.selected_metrics();
    for (std::size_t k = 0; k < m.scales.size(); ++k) {
      auto& cell = series[r.pe][m.scales[k]];
      cell.first += m.accuracy[k];
      cell.second += 1;
    }
  }
  int smin = 1, smax = 1;
  bool first = true;
  for (const auto& [pe, pts] : series)
    for (const auto& [s, v] : pts) {
      smin = first ? s : std::min(smin, s);
      smax = first ? s : std::max(smax, s);
      first = false;
    }

  const double W = 560, Hh = 360, ml = 50, mr = 130, mt = 20, mb = 40;
  auto sx = [&](double s) {
    return smax > smin ? ml + (s - smin) / (smax - smin) * (W - ml - mr) : ml;
  };
  auto sy = [&](double a) { return mt + (1.0 - a) * (Hh - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << Hh << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    os << "<line x1='" << ml << "' y1='" << sy(a) << "' x2='" << W - mr << "' y2='" << sy(a)
       << "' stroke='#ddd'/>\n";
    os << "<text x='" << ml - 8 << "' y='" << sy(a) + 4
       << "' font-size='11' text-anchor='end'>" << a << "</text>\n";
  }
  for (int s = smin; s <= smax; ++s)
    os << "<text x='" << sx(s) << "' y='" << Hh - mb + 16
       << "' font-size='11' text-anchor='middle'>" << s << "</text>\n";
  os << "<text x='" << (ml + W - mr) / 2 << "' y='" << Hh - 6
     << "' font-size='12' text-anchor='middle'>scale</text>\n";

  std::size_t idx = 0;
  for (const auto& [pe, pts] : series) {
    os << "<polyline fill='none' stroke='" << series_color(idx) << "' stroke-width='2' points='";
    for (const auto& [s, v] : pts) os << sx(s) << "," << sy(v.first / v.second) << " ";
    os << "'/>\n";
    os << "<text x='" << W - mr + 10 << "' y='" << mt + 16 * (idx + 1) << "' font-size='12' fill='"
       << series_color(idx) << "'>" << pe << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  write_atomically(path, os.str());
}

void export_prf_heatmap(const nn::Model& model, int n, int top_k, const std::string& path) {
  if (!model.uses_lbpe())
    throw std::invalid_argument("prf heatmap needs a learning-based PE model");
  const auto& B = model.layout.blocks.front();  // first layer's learned PRF
  std::span<const double> theta{model.params.data() + B.lbpe_theta,
                                static_cast<std::size_t>(model.layout.lbpe_theta_size)};
  const int S = model.cfg.s_max;
  const double cell = 14.0, sub = cell / top_k;
  const double W = 60 + n * cell, Hh = 40 + n * cell;
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << Hh << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='10' y='14' font-size='11'>QP rows / KP cols, top-" << top_k
     << " relation values</text>\n";
  std::vector<double> probs(S);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      model.lbpe_arch.forward(theta, i, j, std::max(1, n), probs);
      std::vector<int> order(S);
      for (int s = 0; s < S; ++s) order[s] = s;
      std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                        [&](int a, int b) { return probs[a] > probs[b]; });
      for (int r = 0; r < top_k; ++r) {
        const int v = order[r];
        // Hue keyed by relation value, brightness by rank.
        const int hue = (v * 47) % 360;
        os << "<rect x='" << 40 + j * cell << "' y='" << 30 + i * cell + r * sub << "' width='"
           << cell - 1 << "' height='" << sub - 0.5 << "' fill='hsl(" << hue << ",70%,"
           << 45 + r * 15 << "%)'/>\n";
      }
    }
  }
  os << "</svg>\n";
  write_atomically(path, os.str());
}

}  // namespace lglab::harness
