#include "lglab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lglab/kernels.hpp"
#include "lglab/parallel.hpp"

namespace lglab::nn {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr std::uint32_t kCheckpointVersion = 1;

inline std::size_t tri(int i, int j) {
  return static_cast<std::size_t>(i) * (i + 1) / 2 + j;
}

}  // namespace

std::string to_string(PeKind k) {
  switch (k) {
    case PeKind::ape: return "ape";
    case PeKind::rpe: return "rpe";
    case PeKind::ipe: return "ipe";
    case PeKind::ipe_sh: return "ipe_sh";
    case PeKind::lbpe: return "lbpe";
    default: return "lbpe_sh";
  }
}

PeKind pe_from_string(const std::string& s) {
  for (PeKind k : {PeKind::ape, PeKind::rpe, PeKind::ipe, PeKind::ipe_sh, PeKind::lbpe,
                   PeKind::lbpe_sh})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown pe kind: " + s);
}

bool pe_needs_scale_hint(PeKind k) { return k == PeKind::ipe_sh || k == PeKind::lbpe_sh; }

nlohmann::json ModelConfig::to_json() const {
  return {{"layers", layers},
          {"heads", heads},
          {"dim", dim},
          {"pe", nn::to_string(pe)},
          {"pe_task", tasks::to_string(pe_task)},
          {"s_max", s_max},
          {"max_len", max_len},
          {"target_length", target_length},
          {"vocab", vocab},
          {"lbpe_hidden", lbpe_hidden},
          {"lbpe_freqs", lbpe_freqs},
          {"lbpe_frozen_ipe", lbpe_frozen_ipe}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.dim = j.value("dim", c.dim);
  if (j.contains("pe")) c.pe = pe_from_string(j.at("pe").get<std::string>());
  if (j.contains("pe_task")) c.pe_task = tasks::task_from_string(j.at("pe_task").get<std::string>());
  c.s_max = j.value("s_max", c.s_max);
  c.max_len = j.value("max_len", c.max_len);
  c.target_length = j.value("target_length", c.target_length);
  c.vocab = j.value("vocab", c.vocab);
  c.lbpe_hidden = j.value("lbpe_hidden", c.lbpe_hidden);
  c.lbpe_freqs = j.value("lbpe_freqs", c.lbpe_freqs);
  c.lbpe_frozen_ipe = j.value("lbpe_frozen_ipe", c.lbpe_frozen_ipe);
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch", batch},
          {"micro_batch", micro_batch},
          {"epochs", epochs},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"warmup_ratio", warmup_ratio},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"snapshot_params", snapshot_params}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch = j.value("batch", c.batch);
  c.micro_batch = j.value("micro_batch", c.micro_batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.snapshot_params = j.value("snapshot_params", c.snapshot_params);
  return c;
}

double Metrics::mean() const {
  if (accuracy.empty()) return 0.0;
  double s = 0.0;
  for (double a : accuracy) s += a;
  return s / static_cast<double>(accuracy.size());
}

namespace {

ParamLayout make_layout(const ModelConfig& cfg, const LearnablePrf& lbpe_arch) {
  ParamLayout lo;
  const std::size_t C = cfg.dim;
  std::size_t o = 0;
  auto take = [&](std::size_t count) {
    const std::size_t at = o;
    o += count;
    return at;
  };
  lo.wte = take(static_cast<std::size_t>(cfg.vocab) * C);
  if (cfg.pe == PeKind::ape) lo.wpe = take(static_cast<std::size_t>(cfg.max_len) * C);
  switch (cfg.pe) {
    case PeKind::ape: lo.pe_rows = 0; break;
    case PeKind::rpe: lo.pe_rows = cfg.max_len; break;
    case PeKind::ipe: lo.pe_rows = ipe_prf(cfg.pe_task, cfg.target_length).s_max + 1; break;
    case PeKind::ipe_sh: lo.pe_rows = ipe_sh_prf(cfg.pe_task).s_max + 1; break;
    default: lo.pe_rows = cfg.s_max; break;
  }
  const bool lbpe = cfg.pe == PeKind::lbpe || cfg.pe == PeKind::lbpe_sh;
  lo.lbpe_theta_size = lbpe ? lbpe_arch.theta_size() : 0;
  for (int l = 0; l < cfg.layers; ++l) {
    ParamLayout::Block b{};
    b.ln1_g = take(C);
    b.ln1_b = take(C);
    b.wq = take(C * C);
    b.bq = take(C);
    b.wk = take(C * C);
    b.bk = take(C);
    b.wv = take(C * C);
    b.bv = take(C);
    b.wo = take(C * C);
    b.bo = take(C);
    if (lo.pe_rows > 0) b.pe_table = take(static_cast<std::size_t>(lo.pe_rows) * C);
    if (lo.lbpe_theta_size > 0) b.lbpe_theta = take(static_cast<std::size_t>(lo.lbpe_theta_size));
    b.ln2_g = take(C);
    b.ln2_b = take(C);
    b.fc1_w = take(4 * C * C);
    b.fc1_b = take(4 * C);
    b.fc2_w = take(4 * C * C);
    b.fc2_b = take(C);
    lo.blocks.push_back(b);
  }
  lo.lnf_g = take(C);
  lo.lnf_b = take(C);
  lo.head_w = take(static_cast<std::size_t>(cfg.vocab) * C);
  lo.total = o;
  return lo;
}

}  // namespace

Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  require(cfg.heads >= 1 && cfg.dim % cfg.heads == 0, "heads must divide hidden_dim");
  require(cfg.layers >= 1 && cfg.max_len >= 2 && cfg.dim >= 2, "bad model config");
  Model m;
  m.cfg = cfg;
  switch (cfg.pe) {
    case PeKind::rpe:
      m.table_prf = standard_prf(StandardPe::rpe, cfg.max_len);
      break;
    case PeKind::ipe:
      require(cfg.target_length > 0, "ipe needs target_length");
      m.table_prf = ipe_prf(cfg.pe_task, cfg.target_length);
      break;
    case PeKind::ipe_sh:
      m.table_prf_sh = ipe_sh_prf(cfg.pe_task);
      break;
    case PeKind::lbpe:
    case PeKind::lbpe_sh: {
      const bool sh = cfg.pe == PeKind::lbpe_sh;
      if (cfg.lbpe_frozen_ipe) {
        m.lbpe_arch = sh ? LearnablePrf::frozen_sh(ipe_sh_prf(cfg.pe_task), cfg.s_max)
                         : LearnablePrf::frozen(ipe_prf(cfg.pe_task, cfg.target_length), cfg.s_max);
        m.lbpe_arch.hidden = cfg.lbpe_hidden;
        m.lbpe_arch.freqs = cfg.lbpe_freqs;
      } else {
        Rng arch_rng(0);  // architecture only; real theta is initialized below
        m.lbpe_arch = LearnablePrf::mlp(cfg.s_max, sh, cfg.lbpe_hidden, cfg.lbpe_freqs, arch_rng);
        m.lbpe_arch.theta.clear();
      }
      break;
    }
    default:
      break;
  }
  m.layout = make_layout(cfg, m.lbpe_arch);
  m.params.assign(m.layout.total, 0.0);
  m.decay_mask.assign(m.layout.total, 0);

  Rng init = Rng(seed).fork(1);
  auto init_weight = [&](std::size_t off, int rows, int cols) {
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t k = 0; k < static_cast<std::size_t>(rows) * cols; ++k) {
      m.params[off + k] = init.uniform(-s, s);
      m.decay_mask[off + k] = 1;
    }
  };
  auto init_ones = [&](std::size_t off, int count) {
    std::fill_n(m.params.begin() + off, count, 1.0);
  };

  const int C = cfg.dim;
  init_weight(m.layout.wte, cfg.vocab, C);
  if (cfg.pe == PeKind::ape) init_weight(m.layout.wpe, cfg.max_len, C);
  for (const auto& b : m.layout.blocks) {
    init_ones(b.ln1_g, C);
    init_weight(b.wq, C, C);
    init_weight(b.wk, C, C);
    init_weight(b.wv, C, C);
    init_weight(b.wo, C, C);
    if (m.layout.pe_rows > 0) init_weight(b.pe_table, m.layout.pe_rows, C);
    if (m.layout.lbpe_theta_size > 0 && m.lbpe_arch.mode == LearnablePrf::Mode::mlp) {
      const int F = m.lbpe_arch.feature_count(), H = cfg.lbpe_hidden, S = cfg.s_max;
      std::size_t o = b.lbpe_theta;
      auto fillw = [&](int rows, int cols) {
        const double s = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int k = 0; k < rows * cols; ++k) {
          m.params[o] = init.uniform(-s, s);
          m.decay_mask[o] = 1;
          ++o;
        }
        o += rows;  // biases stay zero
      };
      fillw(H, F);
      fillw(H, H);
      fillw(S, H);
    }
    init_ones(b.ln2_g, C);
    init_weight(b.fc1_w, 4 * C, C);
    init_weight(b.fc2_w, C, 4 * C);
  }
  init_ones(m.layout.lnf_g, C);
  init_weight(m.layout.head_w, cfg.vocab, C);
  return m;
}

namespace {

// Activation buffers for one sequence. resize() is cheap after the first
// call; capacity is retained.
struct Acts {
  int T = 0, C = 0, L = 0, H = 0, V = 0, R = 0, S = 0, HB = 0;
  std::size_t pairs = 0;
  bool table = false, lbpe = false;

  std::vector<double> x;  // (L+1) residual streams
  std::vector<double> ln1, ln1_m, ln1_r, q, k, v, kpe, phi, lh1, lh2, pemix;
  std::vector<double> scores, probs, att, proj, res1, ln2, ln2_m, ln2_r;
  std::vector<double> fc1, gelu, fc2, lnf, lnf_m, lnf_r, logits;
  std::vector<int> pe_idx;

  void resize(const Model& m, int T_) {
    const auto& cfg = m.cfg;
    T = T_;
    C = cfg.dim;
    L = cfg.layers;
    H = cfg.heads;
    V = cfg.vocab;
    R = m.layout.pe_rows;
    S = m.uses_lbpe() ? cfg.s_max : 0;
    HB = cfg.lbpe_hidden;
    pairs = tri(T - 1, T - 1) + 1;
    table = m.uses_pe_table();
    lbpe = m.uses_lbpe();
    const std::size_t TC = static_cast<std::size_t>(T) * C;
    x.assign(static_cast<std::size_t>(L + 1) * TC, 0.0);
    ln1.assign(static_cast<std::size_t>(L) * TC, 0.0);
    ln1_m.assign(static_cast<std::size_t>(L) * T, 0.0);
    ln1_r.assign(static_cast<std::size_t>(L) * T, 0.0);
    q.assign(static_cast<std::size_t>(L) * TC, 0.0);
    k.assign(static_cast<std::size_t>(L) * TC, 0.0);
    v.assign(static_cast<std::size_t>(L) * TC, 0.0);
    if (table) kpe.assign(static_cast<std::size_t>(L) * R * C, 0.0);
    if (table && !lbpe) pe_idx.assign(static_cast<std::size_t>(L) * pairs, 0);
    if (lbpe) {
      phi.assign(static_cast<std::size_t>(L) * pairs * S, 0.0);
      lh1.assign(static_cast<std::size_t>(L) * pairs * HB, 0.0);
      lh2.assign(static_cast<std::size_t>(L) * pairs * HB, 0.0);
      pemix.assign(static_cast<std::size_t>(L) * pairs * C, 0.0);
    }
    const std::size_t HTT = static_cast<std::size_t>(H) * T * T;
    scores.assign(static_cast<std::size_t>(L) * HTT, 0.0);
    probs.assign(static_cast<std::size_t>(L) * HTT, 0.0);
    att.assign(static_cast<std::size_t>(L) * TC, 0.0);
    proj.assign(static_cast<std::size_t>(L) * TC, 0.0);
    res1.assign(static_cast<std::size_t>(L) * TC, 0.0);
    ln2.assign(static_cast<std::size_t>(L) * TC, 0.0);
    ln2_m.assign(static_cast<std::size_t>(L) * T, 0.0);
    ln2_r.assign(static_cast<std::size_t>(L) * T, 0.0);
    fc1.assign(static_cast<std::size_t>(L) * TC * 4, 0.0);
    gelu.assign(static_cast<std::size_t>(L) * TC * 4, 0.0);
    fc2.assign(static_cast<std::size_t>(L) * TC, 0.0);
    lnf.assign(TC, 0.0);
    lnf_m.assign(T, 0.0);
    lnf_r.assign(T, 0.0);
    logits.assign(static_cast<std::size_t>(T) * V, 0.0);
  }
};

int table_value(const Model& m, int i, int j, int scale_hint) {
  switch (m.cfg.pe) {
    case PeKind::rpe:
    case PeKind::ipe:
      return m.table_prf(i, j);
    case PeKind::ipe_sh:
      return m.table_prf_sh(i, j, scale_hint);
    default:
      return 0;
  }
}

void forward_impl(const Model& m, std::span<const int> tokens, int scale_hint, Acts& a) {
  const auto& cfg = m.cfg;
  const auto& lo = m.layout;
  const double* p = m.params.data();
  const int T = static_cast<int>(tokens.size());
  require(T >= 1 && T <= cfg.max_len, "sequence length out of range");
  for (int t : tokens) require(t >= 0 && t < cfg.vocab, "token outside vocabulary");
  if (pe_needs_scale_hint(cfg.pe))
    require(scale_hint >= 1, "missing scale hint for scale-hinted position embedding");
  a.resize(m, T);

  const int C = cfg.dim, H = cfg.heads, hd = C / H;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const std::size_t TC = static_cast<std::size_t>(T) * C;

  // Token embedding; absolute position embedding joins at the input.
  for (int t = 0; t < T; ++t) {
    const double* row = p + lo.wte + static_cast<std::size_t>(tokens[t]) * C;
    double* xt = a.x.data() + static_cast<std::size_t>(t) * C;
    if (cfg.pe == PeKind::ape) {
      const double* pr = p + lo.wpe + static_cast<std::size_t>(t) * C;
      for (int c = 0; c < C; ++c) xt[c] = row[c] + pr[c];
    } else {
      std::copy(row, row + C, xt);
    }
  }

  for (int l = 0; l < cfg.layers; ++l) {
    const auto& B = lo.blocks[l];
    const double* xin = a.x.data() + static_cast<std::size_t>(l) * TC;
    double* ln1 = a.ln1.data() + static_cast<std::size_t>(l) * TC;
    kern::layernorm_forward(ln1, a.ln1_m.data() + static_cast<std::size_t>(l) * T,
                            a.ln1_r.data() + static_cast<std::size_t>(l) * T, xin, p + B.ln1_g,
                            p + B.ln1_b, T, C);
    double* q = a.q.data() + static_cast<std::size_t>(l) * TC;
    double* k = a.k.data() + static_cast<std::size_t>(l) * TC;
    double* v = a.v.data() + static_cast<std::size_t>(l) * TC;
    kern::linear_forward(q, ln1, p + B.wq, p + B.bq, T, C, C);
    kern::linear_forward(k, ln1, p + B.wk, p + B.bk, T, C, C);
    kern::linear_forward(v, ln1, p + B.wv, p + B.bv, T, C, C);

    double* kpe = a.table ? a.kpe.data() + static_cast<std::size_t>(l) * a.R * C : nullptr;
    if (a.table)
      kern::linear_forward(kpe, p + B.pe_table, p + B.wk, nullptr, a.R, C, C);

    int* pe_idx = (a.table && !a.lbpe) ? a.pe_idx.data() + static_cast<std::size_t>(l) * a.pairs
                                       : nullptr;
    if (pe_idx) {
      par_for(T, [&](int i) {
        for (int j = 0; j <= i; ++j) pe_idx[tri(i, j)] = table_value(m, i, j, scale_hint);
      });
    }

    if (a.lbpe) {
      const std::size_t loff = static_cast<std::size_t>(l) * a.pairs;
      std::span<const double> theta{p + B.lbpe_theta,
                                    static_cast<std::size_t>(lo.lbpe_theta_size)};
      par_for(T, [&](int i) {
        for (int j = 0; j <= i; ++j) {
          const std::size_t pr = loff + tri(i, j);
          double* phi = a.phi.data() + pr * a.S;
          m.lbpe_arch.forward(theta, i, j, scale_hint, {phi, static_cast<std::size_t>(a.S)},
                              a.lh1.data() + pr * a.HB, a.lh2.data() + pr * a.HB);
          double* mix = a.pemix.data() + pr * C;
          std::fill(mix, mix + C, 0.0);
          for (int s = 0; s < a.S; ++s) {
            const double w = phi[s];
            if (w == 0.0) continue;
            const double* kr = kpe + static_cast<std::size_t>(s) * C;
            for (int c = 0; c < C; ++c) mix[c] += w * kr[c];
          }
        }
      });
    }

    double* scores = a.scores.data() + static_cast<std::size_t>(l) * H * T * T;
    par_for(T, [&](int i) {
      for (int h = 0; h < H; ++h) {
        const double* qi = q + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
        for (int j = 0; j <= i; ++j) {
          const double* kj = k + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
          double s = 0.0;
          for (int c = 0; c < hd; ++c) s += qi[c] * kj[c];
          if (a.table) {
            const double* pe =
                a.lbpe ? a.pemix.data() +
                             (static_cast<std::size_t>(l) * a.pairs + tri(i, j)) * C +
                             static_cast<std::size_t>(h) * hd
                       : kpe + static_cast<std::size_t>(pe_idx[tri(i, j)]) * C +
                             static_cast<std::size_t>(h) * hd;
            for (int c = 0; c < hd; ++c) s += qi[c] * pe[c];
          }
          scores[static_cast<std::size_t>(h) * T * T + static_cast<std::size_t>(i) * T + j] =
              s * inv_scale;
        }
      }
    });

    double* probs = a.probs.data() + static_cast<std::size_t>(l) * H * T * T;
    for (int h = 0; h < H; ++h)
      kern::causal_softmax_forward(probs + static_cast<std::size_t>(h) * T * T,
                                   scores + static_cast<std::size_t>(h) * T * T, T);

    double* att = a.att.data() + static_cast<std::size_t>(l) * TC;
    par_for(T, [&](int i) {
      for (int h = 0; h < H; ++h) {
        double* out = att + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
        std::fill(out, out + hd, 0.0);
        const double* pr = probs + static_cast<std::size_t>(h) * T * T + static_cast<std::size_t>(i) * T;
        for (int j = 0; j <= i; ++j) {
          const double* vj = v + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
          const double w = pr[j];
          for (int c = 0; c < hd; ++c) out[c] += w * vj[c];
        }
      }
    });

    double* proj = a.proj.data() + static_cast<std::size_t>(l) * TC;
    kern::linear_forward(proj, att, p + B.wo, p + B.bo, T, C, C);
    double* res1 = a.res1.data() + static_cast<std::size_t>(l) * TC;
    for (std::size_t i = 0; i < TC; ++i) res1[i] = xin[i] + proj[i];

    double* ln2 = a.ln2.data() + static_cast<std::size_t>(l) * TC;
    kern::layernorm_forward(ln2, a.ln2_m.data() + static_cast<std::size_t>(l) * T,
                            a.ln2_r.data() + static_cast<std::size_t>(l) * T, res1, p + B.ln2_g,
                            p + B.ln2_b, T, C);
    double* fc1 = a.fc1.data() + static_cast<std::size_t>(l) * TC * 4;
    double* gelu = a.gelu.data() + static_cast<std::size_t>(l) * TC * 4;
    double* fc2 = a.fc2.data() + static_cast<std::size_t>(l) * TC;
    kern::linear_forward(fc1, ln2, p + B.fc1_w, p + B.fc1_b, T, C, 4 * C);
    kern::gelu_forward(gelu, fc1, TC * 4);
    kern::linear_forward(fc2, gelu, p + B.fc2_w, p + B.fc2_b, T, 4 * C, C);
    double* xout = a.x.data() + static_cast<std::size_t>(l + 1) * TC;
    for (std::size_t i = 0; i < TC; ++i) xout[i] = res1[i] + fc2[i];
  }

  kern::layernorm_forward(a.lnf.data(), a.lnf_m.data(), a.lnf_r.data(),
                          a.x.data() + static_cast<std::size_t>(cfg.layers) * TC, p + lo.lnf_g,
                          p + lo.lnf_b, T, C);
  kern::linear_forward(a.logits.data(), a.lnf.data(), p + lo.head_w, nullptr, T, C, cfg.vocab);
}

// Gradient buffers matching Acts.
struct Grads {
  std::vector<double> dx, dlnf, dlogits;
  std::vector<double> dln1, dq, dk, dv, dkpe, dpemix, dphi;
  std::vector<double> dscores, dprobs, datt, dres1, dln2, dfc1, dgelu;

  void resize(const Acts& a) {
    const std::size_t TC = static_cast<std::size_t>(a.T) * a.C;
    dx.assign(static_cast<std::size_t>(a.L + 1) * TC, 0.0);
    dlnf.assign(TC, 0.0);
    dlogits.assign(static_cast<std::size_t>(a.T) * a.V, 0.0);
    dln1.assign(TC, 0.0);
    dq.assign(TC, 0.0);
    dk.assign(TC, 0.0);
    dv.assign(TC, 0.0);
    if (a.table) dkpe.assign(static_cast<std::size_t>(a.R) * a.C, 0.0);
    if (a.lbpe) {
      dpemix.assign(a.pairs * a.C, 0.0);
      dphi.assign(a.pairs * a.S, 0.0);
    }
    const std::size_t HTT = static_cast<std::size_t>(a.H) * a.T * a.T;
    dscores.assign(HTT, 0.0);
    dprobs.assign(HTT, 0.0);
    datt.assign(TC, 0.0);
    dres1.assign(TC, 0.0);
    dln2.assign(TC, 0.0);
    dfc1.assign(TC * 4, 0.0);
    dgelu.assign(TC * 4, 0.0);
  }
};

void backward_impl(const Model& m, std::span<const int> tokens, int scale_hint, const Acts& a,
                   Grads& g, std::span<double> grad) {
  const auto& cfg = m.cfg;
  const auto& lo = m.layout;
  const double* p = m.params.data();
  const int T = a.T, C = a.C, H = a.H, hd = C / H;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const std::size_t TC = static_cast<std::size_t>(T) * C;

  // Caller resized g against this Acts and filled g.dlogits.
  kern::linear_backward(g.dlnf.data(), grad.data() + lo.head_w, nullptr, g.dlogits.data(),
                        a.lnf.data(), p + lo.head_w, T, C, cfg.vocab);
  kern::layernorm_backward(g.dx.data() + static_cast<std::size_t>(cfg.layers) * TC,
                           grad.data() + lo.lnf_g, grad.data() + lo.lnf_b, g.dlnf.data(),
                           a.x.data() + static_cast<std::size_t>(cfg.layers) * TC, p + lo.lnf_g,
                           a.lnf_m.data(), a.lnf_r.data(), T, C);

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& B = lo.blocks[l];
    const double* xin = a.x.data() + static_cast<std::size_t>(l) * TC;
    const double* ln1 = a.ln1.data() + static_cast<std::size_t>(l) * TC;
    const double* q = a.q.data() + static_cast<std::size_t>(l) * TC;
    const double* k = a.k.data() + static_cast<std::size_t>(l) * TC;
    const double* v = a.v.data() + static_cast<std::size_t>(l) * TC;
    const double* kpe = a.table ? a.kpe.data() + static_cast<std::size_t>(l) * a.R * C : nullptr;
    const int* pe_idx = (a.table && !a.lbpe)
                            ? a.pe_idx.data() + static_cast<std::size_t>(l) * a.pairs
                            : nullptr;
    const double* probs = a.probs.data() + static_cast<std::size_t>(l) * H * T * T;
    const double* dx_out = g.dx.data() + static_cast<std::size_t>(l + 1) * TC;

    // MLP path: x_out = res1 + fc2(gelu(fc1(ln2(res1)))).
    std::fill(g.dgelu.begin(), g.dgelu.end(), 0.0);
    std::fill(g.dfc1.begin(), g.dfc1.end(), 0.0);
    std::fill(g.dln2.begin(), g.dln2.end(), 0.0);
    kern::linear_backward(g.dgelu.data(), grad.data() + B.fc2_w, grad.data() + B.fc2_b, dx_out,
                          a.gelu.data() + static_cast<std::size_t>(l) * TC * 4, p + B.fc2_w, T,
                          4 * C, C);
    kern::gelu_backward(g.dfc1.data(), a.fc1.data() + static_cast<std::size_t>(l) * TC * 4,
                        g.dgelu.data(), TC * 4);
    kern::linear_backward(g.dln2.data(), grad.data() + B.fc1_w, grad.data() + B.fc1_b,
                          g.dfc1.data(), a.ln2.data() + static_cast<std::size_t>(l) * TC,
                          p + B.fc1_w, T, C, 4 * C);
    std::copy(dx_out, dx_out + TC, g.dres1.begin());
    kern::layernorm_backward(g.dres1.data(), grad.data() + B.ln2_g, grad.data() + B.ln2_b,
                             g.dln2.data(), a.res1.data() + static_cast<std::size_t>(l) * TC,
                             p + B.ln2_g, a.ln2_m.data() + static_cast<std::size_t>(l) * T,
                             a.ln2_r.data() + static_cast<std::size_t>(l) * T, T, C);

    // Attention path: res1 = x_in + wo(att).
    std::fill(g.datt.begin(), g.datt.end(), 0.0);
    kern::linear_backward(g.datt.data(), grad.data() + B.wo, grad.data() + B.bo, g.dres1.data(),
                          a.att.data() + static_cast<std::size_t>(l) * TC, p + B.wo, T, C, C);

    std::fill(g.dprobs.begin(), g.dprobs.end(), 0.0);
    std::fill(g.dscores.begin(), g.dscores.end(), 0.0);
    std::fill(g.dq.begin(), g.dq.end(), 0.0);
    std::fill(g.dk.begin(), g.dk.end(), 0.0);
    std::fill(g.dv.begin(), g.dv.end(), 0.0);
    if (a.table) std::fill(g.dkpe.begin(), g.dkpe.end(), 0.0);
    if (a.lbpe) {
      std::fill(g.dpemix.begin(), g.dpemix.end(), 0.0);
      std::fill(g.dphi.begin(), g.dphi.end(), 0.0);
    }

    par_for(T, [&](int i) {
      for (int h = 0; h < H; ++h) {
        const double* da = g.datt.data() + static_cast<std::size_t>(i) * C +
                           static_cast<std::size_t>(h) * hd;
        double* dp = g.dprobs.data() + static_cast<std::size_t>(h) * T * T +
                     static_cast<std::size_t>(i) * T;
        for (int j = 0; j <= i; ++j) {
          const double* vj = v + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
          double acc = 0.0;
          for (int c = 0; c < hd; ++c) acc += da[c] * vj[c];
          dp[j] = acc;
        }
      }
    });
    par_for(T, [&](int j) {
      for (int h = 0; h < H; ++h) {
        double* dvj = g.dv.data() + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
        for (int i = j; i < T; ++i) {
          const double w =
              probs[static_cast<std::size_t>(h) * T * T + static_cast<std::size_t>(i) * T + j];
          if (w == 0.0) continue;
          const double* da = g.datt.data() + static_cast<std::size_t>(i) * C +
                             static_cast<std::size_t>(h) * hd;
          for (int c = 0; c < hd; ++c) dvj[c] += w * da[c];
        }
      }
    });
    for (int h = 0; h < H; ++h)
      kern::causal_softmax_backward(g.dscores.data() + static_cast<std::size_t>(h) * T * T,
                                    probs + static_cast<std::size_t>(h) * T * T,
                                    g.dprobs.data() + static_cast<std::size_t>(h) * T * T, T);

    // dq accumulates over keys; dk over queries; the PE key share goes to the
    // table rows (serial: rows are shared) or to the per-pair mixture.
    par_for(T, [&](int i) {
      for (int h = 0; h < H; ++h) {
        double* dqi = g.dq.data() + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
        const double* qi = q + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
        for (int j = 0; j <= i; ++j) {
          const double ds =
              g.dscores[static_cast<std::size_t>(h) * T * T + static_cast<std::size_t>(i) * T + j] *
              inv_scale;
          if (ds == 0.0) continue;
          const double* kj = k + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
          for (int c = 0; c < hd; ++c) dqi[c] += ds * kj[c];
          if (a.table) {
            const double* pe = a.lbpe
                                   ? a.pemix.data() +
                                         (static_cast<std::size_t>(l) * a.pairs + tri(i, j)) * C +
                                         static_cast<std::size_t>(h) * hd
                                   : kpe + static_cast<std::size_t>(pe_idx[tri(i, j)]) * C +
                                         static_cast<std::size_t>(h) * hd;
            for (int c = 0; c < hd; ++c) dqi[c] += ds * pe[c];
          }
          if (a.lbpe) {
            double* dmix = g.dpemix.data() + tri(i, j) * C + static_cast<std::size_t>(h) * hd;
            for (int c = 0; c < hd; ++c) dmix[c] += ds * qi[c];
          }
        }
      }
    });
    par_for(T, [&](int j) {
      for (int h = 0; h < H; ++h) {
        double* dkj = g.dk.data() + static_cast<std::size_t>(j) * C + static_cast<std::size_t>(h) * hd;
        for (int i = j; i < T; ++i) {
          const double ds =
              g.dscores[static_cast<std::size_t>(h) * T * T + static_cast<std::size_t>(i) * T + j] *
              inv_scale;
          if (ds == 0.0) continue;
          const double* qi = q + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
          for (int c = 0; c < hd; ++c) dkj[c] += ds * qi[c];
        }
      }
    });
    if (a.table && !a.lbpe) {
      // Table rows are shared across pairs; keep a single writer.
      for (int i = 0; i < T; ++i) {
        for (int j = 0; j <= i; ++j) {
          double* drow = g.dkpe.data() + static_cast<std::size_t>(pe_idx[tri(i, j)]) * C;
          for (int h = 0; h < H; ++h) {
            const double ds = g.dscores[static_cast<std::size_t>(h) * T * T +
                                        static_cast<std::size_t>(i) * T + j] *
                              inv_scale;
            if (ds == 0.0) continue;
            const double* qi = q + static_cast<std::size_t>(i) * C + static_cast<std::size_t>(h) * hd;
            for (int c = 0; c < hd; ++c) drow[static_cast<std::size_t>(h) * hd + c] += ds * qi[c];
          }
        }
      }
    }
    if (a.lbpe) {
      const std::size_t loff = static_cast<std::size_t>(l) * a.pairs;
      std::span<const double> theta{p + B.lbpe_theta, static_cast<std::size_t>(lo.lbpe_theta_size)};
      // dphi is per pair (parallel); dkpe and dtheta are shared (serial).
      par_for(T, [&](int i) {
        for (int j = 0; j <= i; ++j) {
          const std::size_t pr = tri(i, j);
          const double* dmix = g.dpemix.data() + pr * C;
          double* dphi = g.dphi.data() + pr * a.S;
          for (int s = 0; s < a.S; ++s) {
            const double* kr = kpe + static_cast<std::size_t>(s) * C;
            double acc = 0.0;
            for (int c = 0; c < C; ++c) acc += dmix[c] * kr[c];
            dphi[s] = acc;
          }
        }
      });
      for (int i = 0; i < T; ++i) {
        for (int j = 0; j <= i; ++j) {
          const std::size_t pr = tri(i, j);
          const double* dmix = g.dpemix.data() + pr * C;
          const double* phi = a.phi.data() + (loff + pr) * a.S;
          for (int s = 0; s < a.S; ++s) {
            if (phi[s] == 0.0) continue;
            double* drow = g.dkpe.data() + static_cast<std::size_t>(s) * C;
            for (int c = 0; c < C; ++c) drow[c] += phi[s] * dmix[c];
          }
          m.lbpe_arch.backward(
              theta, i, j, scale_hint, {phi, static_cast<std::size_t>(a.S)},
              {a.lh1.data() + (loff + pr) * a.HB, static_cast<std::size_t>(a.HB)},
              {a.lh2.data() + (loff + pr) * a.HB, static_cast<std::size_t>(a.HB)},
              {g.dphi.data() + pr * a.S, static_cast<std::size_t>(a.S)},
              {grad.data() + B.lbpe_theta, static_cast<std::size_t>(lo.lbpe_theta_size)});
        }
      }
    }
    if (a.table)
      kern::linear_backward(grad.data() + B.pe_table, grad.data() + B.wk, nullptr, g.dkpe.data(),
                            p + B.pe_table, p + B.wk, a.R, C, C);

    std::fill(g.dln1.begin(), g.dln1.end(), 0.0);
    kern::linear_backward(g.dln1.data(), grad.data() + B.wq, grad.data() + B.bq, g.dq.data(), ln1,
                          p + B.wq, T, C, C);
    kern::linear_backward(g.dln1.data(), grad.data() + B.wk, grad.data() + B.bk, g.dk.data(), ln1,
                          p + B.wk, T, C, C);
    kern::linear_backward(g.dln1.data(), grad.data() + B.wv, grad.data() + B.bv, g.dv.data(), ln1,
                          p + B.wv, T, C, C);

    double* dx_in = g.dx.data() + static_cast<std::size_t>(l) * TC;
    kern::add_inplace(dx_in, g.dres1.data(), TC);
    kern::layernorm_backward(dx_in, grad.data() + B.ln1_g, grad.data() + B.ln1_b, g.dln1.data(),
                             xin, p + B.ln1_g, a.ln1_m.data() + static_cast<std::size_t>(l) * T,
                             a.ln1_r.data() + static_cast<std::size_t>(l) * T, T, C);
  }

  // Embedding rows are shared across positions; accumulate serially.
  for (int t = 0; t < T; ++t) {
    const double* dxt = g.dx.data() + static_cast<std::size_t>(t) * C;
    double* drow = grad.data() + lo.wte + static_cast<std::size_t>(tokens[t]) * C;
    for (int c = 0; c < C; ++c) drow[c] += dxt[c];
    if (cfg.pe == PeKind::ape) {
      double* dpr = grad.data() + lo.wpe + static_cast<std::size_t>(t) * C;
      for (int c = 0; c < C; ++c) dpr[c] += dxt[c];
    }
  }
}

// Sum of answer-token cross entropies; fills dlogits with (softmax - onehot)
// on answer rows.
double ce_loss(const Acts& a, std::span<const int> tokens, int answer_start,
               std::vector<double>& dlogits) {
  const int T = a.T, V = a.V;
  double loss = 0.0;
  for (int pos = answer_start - 1; pos < T - 1; ++pos) {
    const double* lrow = a.logits.data() + static_cast<std::size_t>(pos) * V;
    double* drow = dlogits.data() + static_cast<std::size_t>(pos) * V;
    double mx = lrow[0];
    for (int c = 1; c < V; ++c) mx = std::max(mx, lrow[c]);
    double z = 0.0;
    for (int c = 0; c < V; ++c) z += std::exp(lrow[c] - mx);
    const int target = tokens[pos + 1];
    loss += -(lrow[target] - mx - std::log(z));
    for (int c = 0; c < V; ++c) drow[c] = std::exp(lrow[c] - mx) / z;
    drow[target] -= 1.0;
  }
  return loss;
}

int answer_tokens(const tasks::TaskInstance& inst) {
  return static_cast<int>(inst.tokens.size()) - inst.answer_start;
}

}  // namespace

std::vector<double> forward_logits(const Model& m, std::span<const int> tokens, int scale_hint) {
  Acts a;
  forward_impl(m, tokens, scale_hint, a);
  return a.logits;
}

std::vector<double> next_token_distributions(const Model& m, std::span<const int> tokens,
                                             int scale_hint) {
  auto logits = forward_logits(m, tokens, scale_hint);
  const int T = static_cast<int>(tokens.size()), V = m.cfg.vocab;
  for (int t = 0; t < T; ++t) {
    double* row = logits.data() + static_cast<std::size_t>(t) * V;
    double mx = row[0];
    for (int c = 1; c < V; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < V; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (int c = 0; c < V; ++c) row[c] /= z;
  }
  return logits;
}

std::vector<std::vector<double>> attention_probes(const Model& m, std::span<const int> tokens,
                                                  int scale_hint) {
  Acts a;
  forward_impl(m, tokens, scale_hint, a);
  std::vector<std::vector<double>> out;
  const std::size_t HTT = static_cast<std::size_t>(a.H) * a.T * a.T;
  for (int l = 0; l < a.L; ++l)
    out.emplace_back(a.probs.begin() + static_cast<std::size_t>(l) * HTT,
                     a.probs.begin() + static_cast<std::size_t>(l + 1) * HTT);
  return out;
}

double loss_and_grad(const Model& m, std::span<const tasks::TaskInstance> batch,
                     std::span<double> grad) {
  require(!batch.empty(), "empty batch");
  constexpr int kMicro = 16;
  long total_tokens = 0;
  for (const auto& inst : batch) total_tokens += answer_tokens(inst);
  require(total_tokens > 0, "batch has no answer tokens");

  const int micro = std::min<int>(kMicro, static_cast<int>(batch.size()));
  std::vector<std::vector<double>> item_grads(micro);
  std::vector<Acts> acts(micro);
  std::vector<Grads> gbufs(micro);
  std::vector<double> losses(batch.size(), 0.0);

  for (std::size_t base = 0; base < batch.size(); base += micro) {
    const int chunk = static_cast<int>(std::min<std::size_t>(micro, batch.size() - base));
    par_for(chunk, [&](int it) {
      const auto& inst = batch[base + it];
      auto& ig = item_grads[it];
      ig.assign(m.layout.total, 0.0);
      forward_impl(m, inst.tokens, inst.scale, acts[it]);
      gbufs[it].resize(acts[it]);
      losses[base + it] = ce_loss(acts[it], inst.tokens, inst.answer_start, gbufs[it].dlogits);
      backward_impl(m, inst.tokens, inst.scale, acts[it], gbufs[it], ig);
    });
    // Ordered reduction keeps the result independent of the thread count.
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(m.layout.total);
    par_for(static_cast<int>(total), [&](int pi) {
      double acc = grad[pi];
      for (int it = 0; it < chunk; ++it) acc += item_grads[it][pi];
      grad[pi] = acc;
    });
  }

  const double inv = 1.0 / static_cast<double>(total_tokens);
  par_for(static_cast<int>(m.layout.total), [&](int pi) { grad[pi] *= inv; });

  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss * inv;
}

Metrics evaluate_per_scale(const Model& m, const EvalSpec& spec) {
  Metrics metrics;
  metrics.scales = spec.scales;
  Rng root(spec.seed);
  for (std::size_t si = 0; si < spec.scales.size(); ++si) {
    const int scale = spec.scales[si];
    std::vector<char> correct(spec.samples_per_scale, 0);
    par_for(spec.samples_per_scale, [&](int s) {
      Rng r = root.fork(static_cast<std::uint64_t>(si) * 1000003u + s);
      const auto inst =
          tasks::generate(spec.task, scale, spec.aligned, spec.target_length, r);
      // One teacher-forced pass: the instance is exactly right under greedy
      // decoding iff every answer-position argmax matches the reference.
      const auto logits = forward_logits(m, inst.tokens, inst.scale);
      bool ok = true;
      const int V = m.cfg.vocab;
      for (int pos = inst.answer_start - 1; pos < static_cast<int>(inst.tokens.size()) - 1;
           ++pos) {
        const double* row = logits.data() + static_cast<std::size_t>(pos) * V;
        int best = 0;
        for (int c = 1; c < V; ++c)
          if (row[c] > row[best]) best = c;
        if (best != inst.tokens[pos + 1]) {
          ok = false;
          break;
        }
      }
      correct[s] = ok ? 1 : 0;
    });
    long hits = 0;
    for (char c : correct) hits += c;
    metrics.accuracy.push_back(static_cast<double>(hits) / spec.samples_per_scale);
  }
  return metrics;
}

std::vector<int> greedy_decode(const Model& m, std::span<const int> prompt, int answer_len,
                               int scale_hint) {
  std::vector<int> tokens(prompt.begin(), prompt.end());
  const int V = m.cfg.vocab;
  for (int k = 0; k < answer_len; ++k) {
    const auto logits = forward_logits(m, tokens, scale_hint);
    const double* row = logits.data() + (tokens.size() - 1) * V;
    int best = 0;
    for (int c = 1; c < V; ++c)
      if (row[c] > row[best]) best = c;
    tokens.push_back(best);
  }
  return {tokens.begin() + prompt.size(), tokens.end()};
}

TrainResult train(Model& m, const TrainConfig& tc, const std::vector<tasks::TaskInstance>& data,
                  const EvalFn& eval_fn) {
  require(!data.empty(), "training dataset is empty");
  TrainResult result;
  const long steps_per_epoch =
      (static_cast<long>(data.size()) + tc.batch - 1) / tc.batch;
  const long total_steps = steps_per_epoch * tc.epochs;
  const long warmup_steps = std::lround(tc.warmup_ratio * static_cast<double>(total_steps));

  std::vector<double> grad(m.layout.total, 0.0);
  std::vector<double> adam_m(m.layout.total, 0.0);
  std::vector<double> adam_v(m.layout.total, 0.0);

  Rng order_rng = Rng(tc.seed).fork(2);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<tasks::TaskInstance> batch;
  long step = 0;
  auto emit_checkpoint = [&](long at_step) {
    Checkpoint cp;
    cp.step = at_step;
    if (eval_fn) cp.metrics = eval_fn(m);
    cp.metrics.step = at_step;
    if (tc.snapshot_params) cp.params = m.params;
    result.checkpoints.push_back(std::move(cp));
  };

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (long bs = 0; bs < static_cast<long>(data.size()); bs += tc.batch) {
      batch.clear();
      for (long i = bs; i < std::min<long>(bs + tc.batch, data.size()); ++i)
        batch.push_back(data[order[i]]);

      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = loss_and_grad(m, batch, grad);
      if (!std::isfinite(loss))
        throw TrainDivergedError("non-finite loss at step " + std::to_string(step) +
                                 " (epoch " + std::to_string(epoch) + ")");
      result.loss_trace.push_back(loss);

      // Linear warmup into a cosine decay.
      double lr = tc.lr;
      if (warmup_steps > 0 && step < warmup_steps) {
        lr = tc.lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
      } else if (total_steps > warmup_steps) {
        const double progress = static_cast<double>(step - warmup_steps) /
                                static_cast<double>(total_steps - warmup_steps);
        lr = tc.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
      }

      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step + 1));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step + 1));
      const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(m.layout.total);
      par_for(static_cast<int>(total), [&](int pi) {
        const double gv = grad[pi];
        adam_m[pi] = tc.beta1 * adam_m[pi] + (1.0 - tc.beta1) * gv;
        adam_v[pi] = tc.beta2 * adam_v[pi] + (1.0 - tc.beta2) * gv * gv;
        const double mhat = adam_m[pi] / bc1;
        const double vhat = adam_v[pi] / bc2;
        double update = mhat / (std::sqrt(vhat) + tc.eps);
        if (m.decay_mask[pi]) update += tc.weight_decay * m.params[pi];
        m.params[pi] -= lr * update;
      });

      ++step;
      if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step < total_steps)
        emit_checkpoint(step);
    }
  }
  emit_checkpoint(step);
  result.steps = step;
  return result;
}

const Checkpoint& select_best_checkpoint(const std::vector<Checkpoint>& cps) {
  if (cps.empty()) throw std::invalid_argument("no checkpoints");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cps.size(); ++i)
    if (cps[i].metrics.mean() > cps[best].metrics.mean()) best = i;  // ties keep the earliest
  return cps[best];
}

void save_checkpoint(const std::string& path_prefix, const Model& m, const Checkpoint& cp) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["step"] = cp.step;
  manifest["model"] = m.cfg.to_json();
  manifest["metrics"] = {{"scales", cp.metrics.scales}, {"accuracy", cp.metrics.accuracy}};
  std::ofstream jf(path_prefix + ".json");
  jf << manifest.dump(2) << "\n";

  const std::vector<double>& params = cp.params.empty() ? m.params : cp.params;
  std::ofstream bf(path_prefix + ".bin", std::ios::binary);
  const char magic[4] = {'L', 'G', 'C', 'K'};
  bf.write(magic, 4);
  const std::uint32_t version = kCheckpointVersion;
  bf.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t count = params.size();
  bf.write(reinterpret_cast<const char*>(&count), sizeof(count));
  bf.write(reinterpret_cast<const char*>(params.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
}

Model load_checkpoint(const std::string& path_prefix, Checkpoint* cp_out) {
  std::ifstream jf(path_prefix + ".json");
  if (!jf) throw std::runtime_error("cannot open checkpoint manifest " + path_prefix + ".json");
  nlohmann::json manifest;
  jf >> manifest;
  if (manifest.at("version").get<std::uint32_t>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version");
  Model m = make_model(ModelConfig::from_json(manifest.at("model")), 0);

  std::ifstream bf(path_prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot open checkpoint blob " + path_prefix + ".bin");
  char magic[4];
  bf.read(magic, 4);
  if (std::memcmp(magic, "LGCK", 4) != 0) throw std::runtime_error("bad checkpoint magic");
  std::uint32_t version = 0;
  bf.read(reinterpret_cast<char*>(&version), sizeof(version));
  std::uint64_t count = 0;
  bf.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != m.params.size()) throw std::runtime_error("checkpoint size mismatch");
  bf.read(reinterpret_cast<char*>(m.params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));

  if (cp_out) {
    cp_out->step = manifest.at("step").get<long>();
    cp_out->metrics.step = cp_out->step;
    cp_out->metrics.scales = manifest.at("metrics").at("scales").get<std::vector<int>>();
    cp_out->metrics.accuracy = manifest.at("metrics").at("accuracy").get<std::vector<double>>();
  }
  return m;
}

}  // namespace lglab::nn
