// Timing comparison between the serial reference kernels and their OpenMP
// counterparts, plus an end-to-end train-step measurement. Run from the
// build tree: ./bench/lglab_bench [reps]
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "lglab/kernels.hpp"
#include "lglab/model.hpp"
#include "lglab/rng.hpp"
#include "lglab/tasks.hpp"

using namespace lglab;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

void bench_linear(int T, int C, int OC, int reps) {
  Rng rng(1);
  std::vector<double> in((std::size_t)T * C), w((std::size_t)OC * C), b(OC),
      out((std::size_t)T * OC);
  for (auto& x : in) x = rng.uniform(-1, 1);
  for (auto& x : w) x = rng.uniform(-1, 1);
  for (auto& x : b) x = rng.uniform(-1, 1);
  const double serial = time_best_of(reps, [&] {
    kern::serial::linear_forward(out.data(), in.data(), w.data(), b.data(), T, C, OC);
  });
  const double omp = time_best_of(reps, [&] {
    kern::linear_forward(out.data(), in.data(), w.data(), b.data(), T, C, OC);
  });
  std::printf("linear_forward  T=%-4d C=%-4d OC=%-4d  serial %8.3f ms   omp %8.3f ms   x%.2f\n",
              T, C, OC, serial, omp, serial / omp);
}

void bench_linear_backward(int T, int C, int OC, int reps) {
  Rng rng(2);
  std::vector<double> in((std::size_t)T * C), w((std::size_t)OC * C), dout((std::size_t)T * OC);
  std::vector<double> din((std::size_t)T * C), dw((std::size_t)OC * C), db(OC);
  for (auto& x : in) x = rng.uniform(-1, 1);
  for (auto& x : w) x = rng.uniform(-1, 1);
  for (auto& x : dout) x = rng.uniform(-1, 1);
  const double serial = time_best_of(reps, [&] {
    kern::serial::linear_backward(din.data(), dw.data(), db.data(), dout.data(), in.data(),
                                  w.data(), T, C, OC);
  });
  const double omp = time_best_of(reps, [&] {
    kern::linear_backward(din.data(), dw.data(), db.data(), dout.data(), in.data(), w.data(), T,
                          C, OC);
  });
  std::printf("linear_backward T=%-4d C=%-4d OC=%-4d  serial %8.3f ms   omp %8.3f ms   x%.2f\n",
              T, C, OC, serial, omp, serial / omp);
}

void bench_train_step(nn::PeKind pe, int dim, int layers, int batch, int reps) {
  nn::ModelConfig cfg;
  cfg.layers = layers;
  cfg.heads = 1;
  cfg.dim = dim;
  cfg.pe = pe;
  cfg.pe_task = tasks::TaskKind::copy;
  cfg.s_max = 64;
  cfg.max_len = 32;
  cfg.target_length = 10;
  auto model = nn::make_model(cfg, 1);
  auto data = tasks::sample_dataset(tasks::TaskKind::copy, 1, 5, batch, true, 10, 3);
  std::vector<double> grad(model.layout.total, 0.0);
  const double ms = time_best_of(reps, [&] {
    std::fill(grad.begin(), grad.end(), 0.0);
    nn::loss_and_grad(model, data, grad);
  });
  std::printf("train step      pe=%-7s dim=%-4d layers=%d batch=%-4d  %8.2f ms  (%.3f ms/seq)\n",
              nn::to_string(pe).c_str(), dim, layers, batch, ms, ms / batch);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d\n\n", omp_get_max_threads());

  bench_linear(21, 64, 64, reps);
  bench_linear(21, 64, 256, reps);
  bench_linear(44, 128, 512, reps);
  bench_linear(512, 256, 256, reps);
  bench_linear_backward(21, 64, 256, reps);
  bench_linear_backward(512, 256, 256, reps);
  std::printf("\n");
  bench_train_step(nn::PeKind::ipe, 48, 2, 64, reps);
  bench_train_step(nn::PeKind::ipe, 64, 2, 64, reps);
  bench_train_step(nn::PeKind::lbpe, 64, 1, 64, reps);
  return 0;
}
