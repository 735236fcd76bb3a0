// Quick throughput check for the matrix kernels; not part of the test suite.
#include <chrono>
#include <cstdio>
#include <vector>

#include "mitu/gemm.hpp"
#include "mitu/rng.hpp"

using namespace mitu;

static double bench(void (*fn)(const float*, const float*, float*, int64_t,
                               int64_t, int64_t, bool),
                    int64_t M, int64_t N, int64_t K, int reps) {
  Rng rng(1);
  std::vector<float> A(M * K), B(N * K > M * K ? N * K : K * N), C(M * N);
  std::vector<float> Bn(K * N);
  for (auto& v : A) v = float(rng.uniform(-1, 1));
  for (auto& v : Bn) v = float(rng.uniform(-1, 1));
  fn(A.data(), Bn.data(), C.data(), M, N, K, false);  // warm
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn(A.data(), Bn.data(), C.data(), M, N, K, false);
  auto t1 = std::chrono::steady_clock::now();
  double s = std::chrono::duration<double>(t1 - t0).count() / reps;
  return 2.0 * double(M) * N * K / s / 1e9;
}

int main() {
  struct Case { const char* name; int64_t M, N, K; };
  Case cases[] = {
      {"dec conv3 fwd", 64, 4096, 1440},
      {"dec conv1 fwd", 256, 256, 3744},
      {"dec conv4 fwd", 32, 16384, 576},
      {"attn qk  s1", 4096, 64, 32},
      {"ffn fc1  s2", 1024, 256, 64},
  };
  for (auto& c : cases) {
    printf("%-14s nn %6.2f GF/s   nt %6.2f GF/s\n", c.name,
           bench(gemm_nn, c.M, c.N, c.K, 3), bench(gemm_nt, c.M, c.N, c.K, 3));
    fflush(stdout);
  }
  return 0;
}
