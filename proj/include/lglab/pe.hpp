#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lglab/mat.hpp"
#include "lglab/prf.hpp"
#include "lglab/rng.hpp"

namespace lglab {

// Learnable embedding vectors P in R^{S x d}; row s realizes relation value s.
using EmbeddingTable = Mat;

struct RotaryAngles {
  std::vector<double> thetas;  // length d/2

  static RotaryAngles standard(int dim, double base = 10000.0);
};

// Key-only additive PE score: (h_key + P_s)^T W_K^T W_Q h_query.
double additive_key_attention(std::span<const double> h_query, std::span<const double> h_key,
                              int s, const EmbeddingTable& p, const Mat& wq, const Mat& wk);

// Bilinear rotary score with the block-diagonal rotation at angles s*theta_k
// applied between the projected query and key.
double rotary_general(std::span<const double> x_q, std::span<const double> x_k, int s,
                      const RotaryAngles& angles, const Mat& wq, const Mat& wk);

// Split realization for decomposable PRFs phi(i,j) = phi1(i) - phi2(j): the
// query and key are rotated separately and the relative rotation appears in
// their inner product. Agrees with rotary_general at s = phi1(i) - phi2(j).
double rotary_decomposed(std::span<const double> x_q, std::span<const double> x_k, int i, int j,
                         const std::function<int(int)>& phi1, const std::function<int(int)>& phi2,
                         const RotaryAngles& angles, const Mat& wq, const Mat& wk);

// The relation function itself as a learnable map into the probability
// simplex over [S]. Two modes share the interface: a two-hidden-layer MLP
// over sinusoidal position features (the trainable one), and a frozen table
// that emits exact one-hot vectors for a fixed PRF (used to cross-check the
// handcrafted realizations).
struct LearnablePrf {
  enum class Mode { mlp, frozen };

  Mode mode = Mode::mlp;
  int s_count = 0;  // simplex dimension S
  bool scale_hinted = false;
  int hidden = 32;
  int freqs = 6;
  std::vector<double> theta;  // owned parameters (mlp mode)

  // frozen mode
  std::function<int(int, int, int)> frozen_fn;

  static LearnablePrf mlp(int s_count, bool scale_hinted, int hidden, int freqs, Rng& init);
  static LearnablePrf frozen(const Prf& prf, int s_count);
  static LearnablePrf frozen_sh(const PrfSh& prf, int s_count);

  int quantity_count() const { return scale_hinted ? 6 : 3; }
  int feature_count() const { return quantity_count() * 2 * freqs; }
  int theta_size() const;

  void features(int i, int j, int n, std::span<double> out) const;

  // probs has size S; h1/h2 (size hidden each) capture the tanh activations
  // when a backward pass will follow. Pass n = 0 without a scale hint.
  void forward(std::span<const double> th, int i, int j, int n, std::span<double> probs,
               double* h1 = nullptr, double* h2 = nullptr) const;

  // Accumulates into dtheta given the saved activations.
  void backward(std::span<const double> th, int i, int j, int n, std::span<const double> probs,
                std::span<const double> h1, std::span<const double> h2,
                std::span<const double> dprobs, std::span<double> dtheta) const;

  std::vector<double> forward_owned(int i, int j, int n = 0) const;
};

// LBPE(i, j) = P^T phi(i, j; theta). Throws when the learnable PRF output
// leaves the simplex by more than 1e-6.
std::vector<double> lbpe_embed(int i, int j, std::optional<int> n, const LearnablePrf& lprf,
                               const EmbeddingTable& p);

// Gradients of <dout, lbpe_embed(...)> with respect to P and theta.
void lbpe_embed_vjp(int i, int j, std::optional<int> n, const LearnablePrf& lprf,
                    const EmbeddingTable& p, std::span<const double> dout,
                    EmbeddingTable& dp, std::span<double> dtheta);

// Rotary score with the convex mixture sum_s phi_s R_s of per-value rotation
// matrices.
double lbpe_rotary(std::span<const double> x_q, std::span<const double> x_k, int i, int j,
                   const LearnablePrf& lprf, const RotaryAngles& angles, const Mat& wq,
                   const Mat& wk);

// Gradient of the mixed rotary score with respect to theta.
void lbpe_rotary_grad_theta(std::span<const double> x_q, std::span<const double> x_k, int i,
                            int j, const LearnablePrf& lprf, const RotaryAngles& angles,
                            const Mat& wq, const Mat& wk, std::span<double> dtheta);

}  // namespace lglab
