#include "lglab/kernels.hpp"

#include <omp.h>

#include <cmath>

namespace lglab::kern {

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
}

namespace serial {

void linear_forward(double* out, const double* in, const double* w, const double* b,
                    int T, int C, int OC) {
  for (int t = 0; t < T; ++t) {
    const double* x = in + static_cast<std::size_t>(t) * C;
    double* y = out + static_cast<std::size_t>(t) * OC;
    for (int o = 0; o < OC; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * C;
      double acc = b ? b[o] : 0.0;
      for (int c = 0; c < C; ++c) acc += wr[c] * x[c];
      y[o] = acc;
    }
  }
}

void linear_backward(double* din, double* dw, double* db, const double* dout,
                     const double* in, const double* w, int T, int C, int OC) {
  // Unit-stride inner loops vectorize; accumulation order per output element
  // is ascending in the contracted index in both kernel flavors.
  if (din) {
    for (int t = 0; t < T; ++t) {
      const double* dy = dout + static_cast<std::size_t>(t) * OC;
      double* dx = din + static_cast<std::size_t>(t) * C;
      for (int o = 0; o < OC; ++o) {
        const double dv = dy[o];
        if (dv == 0.0) continue;
        const double* wr = w + static_cast<std::size_t>(o) * C;
        for (int c = 0; c < C; ++c) dx[c] += dv * wr[c];
      }
    }
  }
  if (dw) {
    for (int o = 0; o < OC; ++o) {
      double* dwr = dw + static_cast<std::size_t>(o) * C;
      for (int t = 0; t < T; ++t) {
        const double dv = dout[static_cast<std::size_t>(t) * OC + o];
        if (dv == 0.0) continue;
        const double* xr = in + static_cast<std::size_t>(t) * C;
        for (int c = 0; c < C; ++c) dwr[c] += dv * xr[c];
      }
    }
  }
  if (db) {
    for (int o = 0; o < OC; ++o) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t) acc += dout[static_cast<std::size_t>(t) * OC + o];
      db[o] += acc;
    }
  }
}

void layernorm_forward(double* out, double* mean, double* rstd, const double* in,
                       const double* gain, const double* bias, int T, int C) {
  for (int t = 0; t < T; ++t) {
    const double* x = in + static_cast<std::size_t>(t) * C;
    double m = 0.0;
    for (int c = 0; c < C; ++c) m += x[c];
    m /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) {
      const double d = x[c] - m;
      var += d * d;
    }
    var /= C;
    const double rs = 1.0 / std::sqrt(var + 1e-5);
    mean[t] = m;
    rstd[t] = rs;
    double* y = out + static_cast<std::size_t>(t) * C;
    for (int c = 0; c < C; ++c) y[c] = (x[c] - m) * rs * gain[c] + bias[c];
  }
}

void layernorm_backward(double* din, double* dgain, double* dbias, const double* dout,
                        const double* in, const double* gain, const double* mean,
                        const double* rstd, int T, int C) {
  for (int t = 0; t < T; ++t) {
    const double* x = in + static_cast<std::size_t>(t) * C;
    const double* dy = dout + static_cast<std::size_t>(t) * C;
    double* dx = din + static_cast<std::size_t>(t) * C;
    const double m = mean[t];
    const double rs = rstd[t];
    double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[c] - m) * rs;
      const double dyg = dy[c] * gain[c];
      sum_dyg += dyg;
      sum_dyg_xhat += dyg * xhat;
    }
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[c] - m) * rs;
      const double dyg = dy[c] * gain[c];
      dx[c] += rs * (dyg - sum_dyg / C - xhat * sum_dyg_xhat / C);
    }
  }
  // Gain/bias accumulation kept separate so each output element has a single
  // writer in the parallel flavor.
  for (int c = 0; c < C; ++c) {
    double dg = 0.0, dbv = 0.0;
    for (int t = 0; t < T; ++t) {
      const double xhat = (in[static_cast<std::size_t>(t) * C + c] - mean[t]) * rstd[t];
      dg += dout[static_cast<std::size_t>(t) * C + c] * xhat;
      dbv += dout[static_cast<std::size_t>(t) * C + c];
    }
    dgain[c] += dg;
    dbias[c] += dbv;
  }
}

void gelu_forward(double* out, const double* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    const double u = kGeluScale * (x + 0.044715 * x * x * x);
    out[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
}

void gelu_backward(double* din, const double* in, const double* dout, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    const double u = kGeluScale * (x + 0.044715 * x * x * x);
    const double th = std::tanh(u);
    const double sech2 = 1.0 - th * th;
    const double du = kGeluScale * (1.0 + 3.0 * 0.044715 * x * x);
    din[i] += dout[i] * (0.5 * (1.0 + th) + 0.5 * x * sech2 * du);
  }
}

void causal_softmax_forward(double* probs, const double* scores, int T) {
  for (int i = 0; i < T; ++i) {
    const double* s = scores + static_cast<std::size_t>(i) * T;
    double* p = probs + static_cast<std::size_t>(i) * T;
    double mx = s[0];
    for (int j = 1; j <= i; ++j) mx = s[j] > mx ? s[j] : mx;
    double z = 0.0;
    for (int j = 0; j <= i; ++j) {
      p[j] = std::exp(s[j] - mx);
      z += p[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j <= i; ++j) p[j] *= inv;
    for (int j = i + 1; j < T; ++j) p[j] = 0.0;
  }
}

void causal_softmax_backward(double* dscores, const double* probs, const double* dprobs, int T) {
  for (int i = 0; i < T; ++i) {
    const double* p = probs + static_cast<std::size_t>(i) * T;
    const double* dp = dprobs + static_cast<std::size_t>(i) * T;
    double* ds = dscores + static_cast<std::size_t>(i) * T;
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) inner += dp[j] * p[j];
    for (int j = 0; j <= i; ++j) ds[j] += p[j] * (dp[j] - inner);
  }
}

void add_inplace(double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
}

}  // namespace serial

void linear_forward(double* out, const double* in, const double* w, const double* b,
                    int T, int C, int OC) {
  if (omp_in_parallel()) return serial::linear_forward(out, in, w, b, T, C, OC);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) {
    const double* x = in + static_cast<std::size_t>(t) * C;
    double* y = out + static_cast<std::size_t>(t) * OC;
    for (int o = 0; o < OC; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * C;
      double acc = b ? b[o] : 0.0;
      for (int c = 0; c < C; ++c) acc += wr[c] * x[c];
      y[o] = acc;
    }
  }
}

void linear_backward(double* din, double* dw, double* db, const double* dout,
                     const double* in, const double* w, int T, int C, int OC) {
  if (omp_in_parallel()) return serial::linear_backward(din, dw, db, dout, in, w, T, C, OC);
  if (din) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
      const double* dy = dout + static_cast<std::size_t>(t) * OC;
      double* dx = din + static_cast<std::size_t>(t) * C;
      for (int o = 0; o < OC; ++o) {
        const double dv = dy[o];
        if (dv == 0.0) continue;
        const double* wr = w + static_cast<std::size_t>(o) * C;
        for (int c = 0; c < C; ++c) dx[c] += dv * wr[c];
      }
    }
  }
  if (dw) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < OC; ++o) {
      double* dwr = dw + static_cast<std::size_t>(o) * C;
      for (int t = 0; t < T; ++t) {
        const double dv = dout[static_cast<std::size_t>(t) * OC + o];
        if (dv == 0.0) continue;
        const double* xr = in + static_cast<std::size_t>(t) * C;
        for (int c = 0; c < C; ++c) dwr[c] += dv * xr[c];
      }
    }
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < OC; ++o) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t) acc += dout[static_cast<std::size_t>(t) * OC + o];
      db[o] += acc;
    }
  }
}

void layernorm_forward(double* out, double* mean, double* rstd, const double* in,
                       const double* gain, const double* bias, int T, int C) {
  if (omp_in_parallel()) return serial::layernorm_forward(out, mean, rstd, in, gain, bias, T, C);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) {
    serial::layernorm_forward(out + static_cast<std::size_t>(t) * C, mean + t, rstd + t,
                              in + static_cast<std::size_t>(t) * C, gain, bias, 1, C);
  }
}

void layernorm_backward(double* din, double* dgain, double* dbias, const double* dout,
                        const double* in, const double* gain, const double* mean,
                        const double* rstd, int T, int C) {
  if (omp_in_parallel())
    return serial::layernorm_backward(din, dgain, dbias, dout, in, gain, mean, rstd, T, C);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) {
    const double* x = in + static_cast<std::size_t>(t) * C;
    const double* dy = dout + static_cast<std::size_t>(t) * C;
    double* dx = din + static_cast<std::size_t>(t) * C;
    const double m = mean[t];
    const double rs = rstd[t];
    double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[c] - m) * rs;
      const double dyg = dy[c] * gain[c];
      sum_dyg += dyg;
      sum_dyg_xhat += dyg * xhat;
    }
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[c] - m) * rs;
      const double dyg = dy[c] * gain[c];
      dx[c] += rs * (dyg - sum_dyg / C - xhat * sum_dyg_xhat / C);
    }
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double dg = 0.0, dbv = 0.0;
    for (int t = 0; t < T; ++t) {
      const double xhat = (in[static_cast<std::size_t>(t) * C + c] - mean[t]) * rstd[t];
      dg += dout[static_cast<std::size_t>(t) * C + c] * xhat;
      dbv += dout[static_cast<std::size_t>(t) * C + c];
    }
    dgain[c] += dg;
    dbias[c] += dbv;
  }
}

void gelu_forward(double* out, const double* in, std::size_t n) {
  if (omp_in_parallel()) return serial::gelu_forward(out, in, n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    serial::gelu_forward(out + i, in + i, 1);
  }
}

void gelu_backward(double* din, const double* in, const double* dout, std::size_t n) {
  if (omp_in_parallel()) return serial::gelu_backward(din, in, dout, n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    serial::gelu_backward(din + i, in + i, dout + i, 1);
  }
}

void causal_softmax_forward(double* probs, const double* scores, int T) {
  if (omp_in_parallel()) return serial::causal_softmax_forward(probs, scores, T);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < T; ++i) {
    const double* s = scores + static_cast<std::size_t>(i) * T;
    double* p = probs + static_cast<std::size_t>(i) * T;
    double mx = s[0];
    for (int j = 1; j <= i; ++j) mx = s[j] > mx ? s[j] : mx;
    double z = 0.0;
    for (int j = 0; j <= i; ++j) {
      p[j] = std::exp(s[j] - mx);
      z += p[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j <= i; ++j) p[j] *= inv;
    for (int j = i + 1; j < T; ++j) p[j] = 0.0;
  }
}

void causal_softmax_backward(double* dscores, const double* probs, const double* dprobs, int T) {
  if (omp_in_parallel()) return serial::causal_softmax_backward(dscores, probs, dprobs, T);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < T; ++i) {
    const double* p = probs + static_cast<std::size_t>(i) * T;
    const double* dp = dprobs + static_cast<std::size_t>(i) * T;
    double* ds = dscores + static_cast<std::size_t>(i) * T;
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) inner += dp[j] * p[j];
    for (int j = 0; j <= i; ++j) ds[j] += p[j] * (dp[j] - inner);
  }
}

void add_inplace(double* a, const double* b, std::size_t n) {
  if (omp_in_parallel()) return serial::add_inplace(a, b, n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) a[i] += b[i];
}

}  // namespace lglab::kern
