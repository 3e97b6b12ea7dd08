#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lglab/pe.hpp"

using namespace lglab;

namespace {

std::vector<double> randv(int n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("additive key attention") {
  Rng rng(3);
  const int d = 6;
  auto wq = Mat::random(d, d, rng);
  auto wk = Mat::random(d, d, rng);
  auto hq = randv(d, rng);
  auto hk = randv(d, rng);

  EmbeddingTable zero(4, d);
  const double plain = dot(wk.apply(hk), wq.apply(hq));
  CHECK(additive_key_attention(hq, hk, 2, zero, wq, wk) == doctest::Approx(plain).epsilon(1e-12));

  // Zero key with identity projections: the score reduces to P_s . h_query.
  EmbeddingTable p = Mat::random(4, d, rng);
  std::vector<double> hk0(d, 0.0);
  const auto eye = Mat::identity(d);
  CHECK(additive_key_attention(hq, hk0, 1, p, eye, eye) ==
        doctest::Approx(dot(p.row(1), hq)).epsilon(1e-12));

  // Equal rows of P give equal scores for equal inputs.
  EmbeddingTable twin(2, d);
  for (int c = 0; c < d; ++c) {
    twin.at(0, c) = p.at(0, c);
    twin.at(1, c) = p.at(0, c);
  }
  CHECK(additive_key_attention(hq, hk, 0, twin, wq, wk) ==
        additive_key_attention(hq, hk, 1, twin, wq, wk));
}

TEST_CASE("rotary general: zero angle, quarter turn, periodicity") {
  Rng rng(5);
  const int d = 6;
  auto wq = Mat::random(d, d, rng);
  auto wk = Mat::random(d, d, rng);
  auto xq = randv(d, rng);
  auto xk = randv(d, rng);
  auto angles = RotaryAngles::standard(d);

  const double plain = dot(wq.apply(xq), wk.apply(xk));
  CHECK(rotary_general(xq, xk, 0, angles, wq, wk) == doctest::Approx(plain).epsilon(1e-12));

  RotaryAngles quarter;
  quarter.thetas = {3.14159265358979323846 / 2.0};
  const auto eye2 = Mat::identity(2);
  std::vector<double> e1{1.0, 0.0};
  CHECK(rotary_general(e1, e1, 1, quarter, eye2, eye2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rotary_general(e1, e1, 4, quarter, eye2, eye2) ==
        doctest::Approx(rotary_general(e1, e1, 0, quarter, eye2, eye2)).epsilon(1e-9));

  Mat odd = Mat::identity(3);
  RotaryAngles bad;
  bad.thetas = {1.0};
  std::vector<double> x3{1.0, 0.0, 0.0};
  CHECK_THROWS_AS(rotary_general(x3, x3, 1, bad, odd, odd), std::invalid_argument);
}

TEST_CASE("rotary decomposed matches rotary general at s = phi1(i) - phi2(j)") {
  Rng rng(7);
  const int d = 8;
  auto angles = RotaryAngles::standard(d);
  auto phi_id = [](int u) { return u; };
  for (int trial = 0; trial < 200; ++trial) {
    auto wq = Mat::random(d, d, rng);
    auto wk = Mat::random(d, d, rng);
    auto xq = randv(d, rng);
    auto xk = randv(d, rng);
    const int j = static_cast<int>(rng.uniform_int(0, 20));
    const int i = j + static_cast<int>(rng.uniform_int(0, 12));
    const double split = rotary_decomposed(xq, xk, i, j, phi_id, phi_id, angles, wq, wk);
    const double direct = rotary_general(xq, xk, i - j, angles, wq, wk);
    CHECK(std::abs(split - direct) <= 1e-9);
  }

  // phi1 = phi2 = identity at i = j reduces to the plain product.
  auto wq = Mat::random(d, d, rng);
  auto wk = Mat::random(d, d, rng);
  auto xq = randv(d, rng);
  auto xk = randv(d, rng);
  CHECK(rotary_decomposed(xq, xk, 9, 9, phi_id, phi_id, angles, wq, wk) ==
        doctest::Approx(dot(wq.apply(xq), wk.apply(xk))).epsilon(1e-12));

  // Shifting both positions by a constant leaves the score unchanged.
  const double base = rotary_decomposed(xq, xk, 11, 4, phi_id, phi_id, angles, wq, wk);
  for (int c = 1; c <= 5; ++c)
    CHECK(rotary_decomposed(xq, xk, 11 + c, 4 + c, phi_id, phi_id, angles, wq, wk) ==
          doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("learnable PRF outputs stay on the simplex under any theta") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto lprf = LearnablePrf::mlp(17, trial % 2 == 1, 16, 4, rng);
    for (auto& t : lprf.theta) t = rng.uniform(-3.0, 3.0);
    const int n = 1 + trial;
    auto probs = lprf.forward_owned(9, 4, n);
    double sum = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("lbpe embed: one-hot selects a row, uniform averages") {
  Rng rng(13);
  const int S = 6, d = 5;
  EmbeddingTable p = Mat::random(S, d, rng);

  auto onehot = LearnablePrf::frozen(constant_prf(3), S);
  auto out = lbpe_embed(4, 2, std::nullopt, onehot, p);
  for (int c = 0; c < d; ++c) CHECK(out[c] == p.at(3, c));

  // An mlp head with its final layer zeroed softmaxes to uniform weights.
  auto mlp = LearnablePrf::mlp(S, false, 8, 3, rng);
  const int tail = S * mlp.hidden + S;
  for (int k = 0; k < tail; ++k) mlp.theta[mlp.theta.size() - 1 - k] = 0.0;
  auto mixed = lbpe_embed(4, 2, std::nullopt, mlp, p);
  for (int c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int s = 0; s < S; ++s) mean += p.at(s, c) / S;
    CHECK(mixed[c] == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("lbpe embed gradients match finite differences") {
  Rng rng(17);
  const int S = 5, d = 4;
  EmbeddingTable p = Mat::random(S, d, rng);
  auto lprf = LearnablePrf::mlp(S, false, 8, 3, rng);

  const auto dout = randv(d, rng);
  auto scalar = [&](const EmbeddingTable& pt, const LearnablePrf& lp) {
    const auto out = lbpe_embed(7, 3, std::nullopt, lp, pt);
    return dot(out, dout);
  };

  EmbeddingTable dp(S, d);
  std::vector<double> dtheta(lprf.theta.size(), 0.0);
  lbpe_embed_vjp(7, 3, std::nullopt, lprf, p, dout, dp, dtheta);

  const double h = 1e-6;
  for (int probe = 0; probe < 10; ++probe) {
    const int idx = static_cast<int>(rng.uniform_int(0, S * d - 1));
    auto pp = p;
    pp.v[idx] += h;
    auto pm = p;
    pm.v[idx] -= h;
    const double fd = (scalar(pp, lprf) - scalar(pm, lprf)) / (2 * h);
    const double an = dp.v[idx];
    CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (int probe = 0; probe < 10; ++probe) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, lprf.theta.size() - 1));
    auto lp = lprf;
    lp.theta[idx] += h;
    auto lm = lprf;
    lm.theta[idx] -= h;
    const double fd = (scalar(p, lp) - scalar(p, lm)) / (2 * h);
    CHECK(std::abs(fd - dtheta[idx]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("lbpe rotary: one-hot collapse, uniform averaging, theta gradients") {
  Rng rng(19);
  const int d = 6, S = 5;
  auto angles = RotaryAngles::standard(d);
  auto wq = Mat::random(d, d, rng);
  auto wk = Mat::random(d, d, rng);
  auto xq = randv(d, rng);
  auto xk = randv(d, rng);

  auto onehot = LearnablePrf::frozen(constant_prf(2), S);
  CHECK(lbpe_rotary(xq, xk, 8, 3, onehot, angles, wq, wk) ==
        doctest::Approx(rotary_general(xq, xk, 2, angles, wq, wk)).epsilon(1e-12));

  // Zeroed last layer -> uniform weights -> average of the per-value scores.
  auto mlp = LearnablePrf::mlp(S, false, 8, 3, rng);
  const int tail = S * mlp.hidden + S;
  for (int k = 0; k < tail; ++k) mlp.theta[mlp.theta.size() - 1 - k] = 0.0;
  double avg = 0.0;
  for (int s = 0; s < S; ++s) avg += rotary_general(xq, xk, s, angles, wq, wk) / S;
  CHECK(lbpe_rotary(xq, xk, 8, 3, mlp, angles, wq, wk) == doctest::Approx(avg).epsilon(1e-9));

  auto lprf = LearnablePrf::mlp(S, false, 8, 3, rng);
  std::vector<double> dtheta(lprf.theta.size(), 0.0);
  lbpe_rotary_grad_theta(xq, xk, 8, 3, lprf, angles, wq, wk, dtheta);
  const double h = 1e-6;
  for (int probe = 0; probe < 12; ++probe) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, lprf.theta.size() - 1));
    auto lp = lprf;
    lp.theta[idx] += h;
    auto lm = lprf;
    lm.theta[idx] -= h;
    const double fd = (lbpe_rotary(xq, xk, 8, 3, lp, angles, wq, wk) -
                       lbpe_rotary(xq, xk, 8, 3, lm, angles, wq, wk)) /
                      (2 * h);
    CHECK(std::abs(fd - dtheta[idx]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("lbpe embed rejects a broken simplex head") {
  LearnablePrf broken;
  broken.mode = LearnablePrf::Mode::frozen;
  broken.s_count = 3;
  broken.frozen_fn = [](int, int, int) { return 5; };  // outside [0, S)
  EmbeddingTable p(3, 4);
  CHECK_THROWS(lbpe_embed(2, 1, std::nullopt, broken, p));
}
