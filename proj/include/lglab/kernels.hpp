#pragma once

#include <cstddef>

// Training-loop kernels. Every kernel comes in two flavors with identical
// contracts: kern::serial::* is the reference implementation, kern::* is the
// OpenMP one. Parallel loops are always over independent output elements
// (rows of the output, never split reductions), so the two flavors produce
// bitwise-identical results for any thread count. tests/test_kernels.cpp
// asserts this; bench/ compares their throughput.
namespace lglab::kern {

namespace serial {

// out[T x OC] = in[T x C] * w^T + b, w stored [OC x C].
void linear_forward(double* out, const double* in, const double* w, const double* b,
                    int T, int C, int OC);

// Accumulates into din / dw / db (callers zero them per step).
void linear_backward(double* din, double* dw, double* db, const double* dout,
                     const double* in, const double* w, int T, int C, int OC);

void layernorm_forward(double* out, double* mean, double* rstd, const double* in,
                       const double* gain, const double* bias, int T, int C);

void layernorm_backward(double* din, double* dgain, double* dbias, const double* dout,
                        const double* in, const double* gain, const double* mean,
                        const double* rstd, int T, int C);

void gelu_forward(double* out, const double* in, std::size_t n);

void gelu_backward(double* din, const double* in, const double* dout, std::size_t n);

// Causal softmax over scores[T x T] (row i uses columns 0..i).
void causal_softmax_forward(double* probs, const double* scores, int T);

void causal_softmax_backward(double* dscores, const double* probs, const double* dprobs, int T);

void add_inplace(double* a, const double* b, std::size_t n);

}  // namespace serial

void linear_forward(double* out, const double* in, const double* w, const double* b,
                    int T, int C, int OC);
void linear_backward(double* din, double* dw, double* db, const double* dout,
                     const double* in, const double* w, int T, int C, int OC);
void layernorm_forward(double* out, double* mean, double* rstd, const double* in,
                       const double* gain, const double* bias, int T, int C);
void layernorm_backward(double* din, double* dgain, double* dbias, const double* dout,
                        const double* in, const double* gain, const double* mean,
                        const double* rstd, int T, int C);
void gelu_forward(double* out, const double* in, std::size_t n);
void gelu_backward(double* din, const double* in, const double* dout, std::size_t n);
void causal_softmax_forward(double* probs, const double* scores, int T);
void causal_softmax_backward(double* dscores, const double* probs, const double* dprobs, int T);
void add_inplace(double* a, const double* b, std::size_t n);

}  // namespace lglab::kern
