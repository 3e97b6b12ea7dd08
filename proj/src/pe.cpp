#include "lglab/pe.hpp"

#include <cmath>
#include <stdexcept>

namespace lglab {

RotaryAngles RotaryAngles::standard(int dim, double base) {
  if (dim % 2 != 0) throw std::invalid_argument("rotary dimension must be even");
  RotaryAngles a;
  a.thetas.resize(dim / 2);
  for (int k = 0; k < dim / 2; ++k)
    a.thetas[k] = std::pow(base, -2.0 * k / dim);
  return a;
}

double additive_key_attention(std::span<const double> h_query, std::span<const double> h_key,
                              int s, const EmbeddingTable& p, const Mat& wq, const Mat& wk) {
  if (static_cast<int>(h_key.size()) != wk.cols || static_cast<int>(h_query.size()) != wq.cols ||
      s < 0 || s >= p.rows || p.cols != wk.cols)
    throw std::invalid_argument("additive_key_attention: dimension mismatch");
  std::vector<double> key(h_key.begin(), h_key.end());
  const auto ps = p.row(s);
  for (int c = 0; c < p.cols; ++c) key[c] += ps[c];
  return dot(wk.apply(key), wq.apply(h_query));
}

namespace {

void check_rotary_dims(std::span<const double> x_q, std::span<const double> x_k,
                       const RotaryAngles& angles, const Mat& wq, const Mat& wk) {
  if (wq.rows != wk.rows || wq.rows % 2 != 0) throw std::invalid_argument("odd rotary dimension");
  if (static_cast<int>(angles.thetas.size()) != wq.rows / 2)
    throw std::invalid_argument("rotary angle count must be d/2");
  if (static_cast<int>(x_q.size()) != wq.cols || static_cast<int>(x_k.size()) != wk.cols)
    throw std::invalid_argument("rotary input dimension mismatch");
}

// q^T R(alpha_b) k accumulated over the 2x2 blocks.
double blockwise_bilinear(std::span<const double> q, std::span<const double> k,
                          const std::function<double(int)>& block_angle) {
  double acc = 0.0;
  for (std::size_t b = 0; b < q.size() / 2; ++b) {
    const double c = std::cos(block_angle(static_cast<int>(b)));
    const double s = std::sin(block_angle(static_cast<int>(b)));
    const double qx = q[2 * b], qy = q[2 * b + 1];
    const double kx = k[2 * b], ky = k[2 * b + 1];
    acc += qx * (c * kx - s * ky) + qy * (s * kx + c * ky);
  }
  return acc;
}

}  // namespace

double rotary_general(std::span<const double> x_q, std::span<const double> x_k, int s,
                      const RotaryAngles& angles, const Mat& wq, const Mat& wk) {
  check_rotary_dims(x_q, x_k, angles, wq, wk);
  const auto q = wq.apply(x_q);
  const auto k = wk.apply(x_k);
  return blockwise_bilinear(q, k, [&](int b) { return s * angles.thetas[b]; });
}

double rotary_decomposed(std::span<const double> x_q, std::span<const double> x_k, int i, int j,
                         const std::function<int(int)>& phi1, const std::function<int(int)>& phi2,
                         const RotaryAngles& angles, const Mat& wq, const Mat& wk) {
  check_rotary_dims(x_q, x_k, angles, wq, wk);
  auto q = wq.apply(x_q);
  auto k = wk.apply(x_k);
  // Rotating the query by -phi1(i)*theta and the key by -phi2(j)*theta makes
  // the inner product depend on the difference phi1(i) - phi2(j) alone.
  auto rotate = [&](std::vector<double>& v, int steps) {
    for (std::size_t b = 0; b < v.size() / 2; ++b) {
      const double a = -steps * angles.thetas[b];
      const double c = std::cos(a), s = std::sin(a);
      const double x = v[2 * b], y = v[2 * b + 1];
      v[2 * b] = c * x - s * y;
      v[2 * b + 1] = s * x + c * y;
    }
  };
  rotate(q, phi1(i));
  rotate(k, phi2(j));
  return dot(q, k);
}

int LearnablePrf::theta_size() const {
  const int F = feature_count();
  return hidden * F + hidden + hidden * hidden + hidden + s_count * hidden + s_count;
}

LearnablePrf LearnablePrf::mlp(int s_count, bool scale_hinted, int hidden, int freqs, Rng& init) {
  LearnablePrf l;
  l.mode = Mode::mlp;
  l.s_count = s_count;
  l.scale_hinted = scale_hinted;
  l.hidden = hidden;
  l.freqs = freqs;
  l.theta.resize(l.theta_size());
  const int F = l.feature_count();
  // Weights get fan-in scaled symmetric-uniform init, biases start at zero.
  std::size_t o = 0;
  auto fill = [&](int rows, int cols) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int k = 0; k < rows * cols; ++k) l.theta[o++] = init.uniform(-scale, scale);
    o += rows;  // bias block
  };
  fill(hidden, F);
  fill(hidden, hidden);
  fill(s_count, hidden);
  return l;
}

LearnablePrf LearnablePrf::frozen(const Prf& prf, int s_count) {
  LearnablePrf l;
  l.mode = Mode::frozen;
  l.s_count = s_count;
  l.scale_hinted = false;
  l.frozen_fn = [prf, s_count](int i, int j, int) {
    const int v = prf(i, j);
    if (v >= s_count) throw std::out_of_range("frozen PRF value exceeds S");
    return v;
  };
  return l;
}

LearnablePrf LearnablePrf::frozen_sh(const PrfSh& prf, int s_count) {
  LearnablePrf l;
  l.mode = Mode::frozen;
  l.s_count = s_count;
  l.scale_hinted = true;
  l.frozen_fn = [prf, s_count](int i, int j, int n) {
    const int v = prf(i, j, n);
    if (v >= s_count) throw std::out_of_range("frozen PRF value exceeds S");
    return v;
  };
  return l;
}

void LearnablePrf::features(int i, int j, int n, std::span<double> out) const {
  double q[6];
  q[0] = i;
  q[1] = j;
  q[2] = i - j;
  if (scale_hinted) {
    if (n < 1) throw std::invalid_argument("scale hint required");
    q[3] = n;
    q[4] = (i - j) % n;
    q[5] = (i - j) / n;
  }
  const int Q = quantity_count();
  // Geometric frequency ladder from 1 down to ~1/200; the low end stays in
  // its near-linear regime over the position range, so linear relations in
  // (i, j) remain representable.
  std::size_t o = 0;
  for (int k = 0; k < Q; ++k) {
    for (int f = 0; f < freqs; ++f) {
      const double w = std::pow(200.0, -static_cast<double>(f) / std::max(1, freqs - 1));
      out[o++] = std::sin(w * q[k]);
      out[o++] = std::cos(w * q[k]);
    }
  }
}

void LearnablePrf::forward(std::span<const double> th, int i, int j, int n,
                           std::span<double> probs, double* h1, double* h2) const {
  if (static_cast<int>(probs.size()) != s_count) throw std::invalid_argument("probs size");
  if (mode == Mode::frozen) {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[frozen_fn(i, j, n)] = 1.0;
    return;
  }
  const int F = feature_count(), H = hidden, S = s_count;
  std::vector<double> feat(F), a1(H), a2(H);
  features(i, j, n, feat);
  const double* w1 = th.data();
  const double* b1 = w1 + static_cast<std::size_t>(H) * F;
  const double* w2 = b1 + H;
  const double* b2 = w2 + static_cast<std::size_t>(H) * H;
  const double* w3 = b2 + H;
  const double* b3 = w3 + static_cast<std::size_t>(S) * H;
  for (int h = 0; h < H; ++h) {
    double acc = b1[h];
    for (int f = 0; f < F; ++f) acc += w1[static_cast<std::size_t>(h) * F + f] * feat[f];
    a1[h] = std::tanh(acc);
  }
  for (int h = 0; h < H; ++h) {
    double acc = b2[h];
    for (int g = 0; g < H; ++g) acc += w2[static_cast<std::size_t>(h) * H + g] * a1[g];
    a2[h] = std::tanh(acc);
  }
  double mx = -1e300;
  for (int s = 0; s < S; ++s) {
    double acc = b3[s];
    for (int h = 0; h < H; ++h) acc += w3[static_cast<std::size_t>(s) * H + h] * a2[h];
    probs[s] = acc;
    mx = std::max(mx, acc);
  }
  double z = 0.0;
  for (int s = 0; s < S; ++s) {
    probs[s] = std::exp(probs[s] - mx);
    z += probs[s];
  }
  for (int s = 0; s < S; ++s) probs[s] /= z;
  if (h1) std::copy(a1.begin(), a1.end(), h1);
  if (h2) std::copy(a2.begin(), a2.end(), h2);
}

void LearnablePrf::backward(std::span<const double> th, int i, int j, int n,
                            std::span<const double> probs, std::span<const double> h1,
                            std::span<const double> h2, std::span<const double> dprobs,
                            std::span<double> dtheta) const {
  if (mode == Mode::frozen) return;
  const int F = feature_count(), H = hidden, S = s_count;
  std::vector<double> feat(F);
  features(i, j, n, feat);
  const double* w2 = th.data() + static_cast<std::size_t>(H) * F + H;
  const double* w3 = w2 + static_cast<std::size_t>(H) * H + H;
  double* dw1 = dtheta.data();
  double* db1 = dw1 + static_cast<std::size_t>(H) * F;
  double* dw2 = db1 + H;
  double* db2 = dw2 + static_cast<std::size_t>(H) * H;
  double* dw3 = db2 + H;
  double* db3 = dw3 + static_cast<std::size_t>(S) * H;

  // Softmax.
  double inner = 0.0;
  for (int s = 0; s < S; ++s) inner += dprobs[s] * probs[s];
  std::vector<double> dlogit(S);
  for (int s = 0; s < S; ++s) dlogit[s] = probs[s] * (dprobs[s] - inner);

  std::vector<double> da2(H, 0.0), da1(H, 0.0);
  for (int s = 0; s < S; ++s) {
    db3[s] += dlogit[s];
    for (int h = 0; h < H; ++h) {
      dw3[static_cast<std::size_t>(s) * H + h] += dlogit[s] * h2[h];
      da2[h] += dlogit[s] * w3[static_cast<std::size_t>(s) * H + h];
    }
  }
  for (int h = 0; h < H; ++h) da2[h] *= 1.0 - h2[h] * h2[h];
  for (int h = 0; h < H; ++h) {
    db2[h] += da2[h];
    for (int g = 0; g < H; ++g) {
      dw2[static_cast<std::size_t>(h) * H + g] += da2[h] * h1[g];
      da1[g] += da2[h] * w2[static_cast<std::size_t>(h) * H + g];
    }
  }
  for (int h = 0; h < H; ++h) da1[h] *= 1.0 - h1[h] * h1[h];
  for (int h = 0; h < H; ++h) {
    db1[h] += da1[h];
    for (int f = 0; f < F; ++f) dw1[static_cast<std::size_t>(h) * F + f] += da1[h] * feat[f];
  }
}

std::vector<double> LearnablePrf::forward_owned(int i, int j, int n) const {
  std::vector<double> probs(s_count);
  forward(theta, i, j, n, probs);
  return probs;
}

namespace {

std::vector<double> simplex_probs(int i, int j, std::optional<int> n, const LearnablePrf& lprf) {
  auto probs = lprf.forward_owned(i, j, n.value_or(0));
  double sum = 0.0;
  for (double p : probs) {
    if (p < -1e-6) throw std::domain_error("learnable PRF produced a negative weight");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::domain_error("learnable PRF output does not sum to one");
  return probs;
}

}  // namespace

std::vector<double> lbpe_embed(int i, int j, std::optional<int> n, const LearnablePrf& lprf,
                               const EmbeddingTable& p) {
  if (p.rows != lprf.s_count) throw std::invalid_argument("embedding rows must equal S");
  const auto probs = simplex_probs(i, j, n, lprf);
  std::vector<double> out(p.cols, 0.0);
  for (int s = 0; s < p.rows; ++s) {
    if (probs[s] == 0.0) continue;
    const auto row = p.row(s);
    for (int c = 0; c < p.cols; ++c) out[c] += probs[s] * row[c];
  }
  return out;
}

void lbpe_embed_vjp(int i, int j, std::optional<int> n, const LearnablePrf& lprf,
                    const EmbeddingTable& p, std::span<const double> dout,
                    EmbeddingTable& dp, std::span<double> dtheta) {
  const int S = lprf.s_count;
  std::vector<double> probs(S), h1(lprf.hidden), h2(lprf.hidden);
  lprf.forward(lprf.theta, i, j, n.value_or(0), probs, h1.data(), h2.data());
  std::vector<double> dprobs(S, 0.0);
  for (int s = 0; s < S; ++s) {
    const auto row = p.row(s);
    for (int c = 0; c < p.cols; ++c) {
      dp.at(s, c) += probs[s] * dout[c];
      dprobs[s] += row[c] * dout[c];
    }
  }
  lprf.backward(lprf.theta, i, j, n.value_or(0), probs, h1, h2, dprobs, dtheta);
}

double lbpe_rotary(std::span<const double> x_q, std::span<const double> x_k, int i, int j,
                   const LearnablePrf& lprf, const RotaryAngles& angles, const Mat& wq,
                   const Mat& wk) {
  check_rotary_dims(x_q, x_k, angles, wq, wk);
  const auto probs = simplex_probs(i, j, std::nullopt, lprf);
  const auto q = wq.apply(x_q);
  const auto k = wk.apply(x_k);
  double acc = 0.0;
  for (std::size_t b = 0; b < q.size() / 2; ++b) {
    // Mix the rotation matrices, which by bilinearity equals mixing scores.
    double c = 0.0, s = 0.0;
    for (int v = 0; v < lprf.s_count; ++v) {
      c += probs[v] * std::cos(v * angles.thetas[b]);
      s += probs[v] * std::sin(v * angles.thetas[b]);
    }
    const double qx = q[2 * b], qy = q[2 * b + 1];
    const double kx = k[2 * b], ky = k[2 * b + 1];
    acc += qx * (c * kx - s * ky) + qy * (s * kx + c * ky);
  }
  return acc;
}

void lbpe_rotary_grad_theta(std::span<const double> x_q, std::span<const double> x_k, int i,
                            int j, const LearnablePrf& lprf, const RotaryAngles& angles,
                            const Mat& wq, const Mat& wk, std::span<double> dtheta) {
  const int S = lprf.s_count;
  std::vector<double> probs(S), h1(lprf.hidden), h2(lprf.hidden);
  lprf.forward(lprf.theta, i, j, 0, probs, h1.data(), h2.data());
  std::vector<double> dprobs(S);
  for (int v = 0; v < S; ++v)
    dprobs[v] = rotary_general(x_q, x_k, v, angles, wq, wk);
  lprf.backward(lprf.theta, i, j, 0, probs, h1, h2, dprobs, dtheta);
}

}  // namespace lglab
