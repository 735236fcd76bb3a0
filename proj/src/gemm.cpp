#include "mitu/gemm.hpp"

#include <algorithm>
#include <vector>

#include "mitu/parallel.hpp"

// Register-blocked kernels. The contraction loop accumulates in double and
// stores float, per the numeric policy used across the tensor engine. Work is
// partitioned over disjoint output rows, so the result is bitwise identical
// for any thread count.
//
// gemm_nn packs B into 8-column panels and A into 4-row blocks so the inner
// loop is load/convert/broadcast/FMA only; panel strips are sized to stay
// cache resident while every row block sweeps them. Pack buffers persist
// between calls.

namespace mitu {
namespace {

constexpr int64_t kNR = 8;  // columns per packed panel

std::vector<float>& bpack_buf() {
  static thread_local std::vector<float> v;
  return v;
}
std::vector<double>& apack_buf() {
  static thread_local std::vector<double> v;
  return v;
}

// 4xK double block of A against one K x 8 float panel of B.
void nn_micro(const double* ap, const float* bp, float* C, int64_t ldc,
              int64_t K, int rows, int cols, bool acc) {
  double c[4][kNR] = {};
  for (int64_t k = 0; k < K; ++k) {
    const float* bv = bp + k * kNR;
    const double* av = ap + k * 4;
    for (int r = 0; r < 4; ++r) {
      const double a = av[r];
      for (int t = 0; t < kNR; ++t) c[r][t] += a * double(bv[t]);
    }
  }
  for (int r = 0; r < rows; ++r) {
    float* out = C + r * ldc;
    for (int t = 0; t < cols; ++t)
      out[t] = acc ? out[t] + float(c[r][t]) : float(c[r][t]);
  }
}

}  // namespace

void gemm_nn(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate) {
  const int64_t panels = (N + kNR - 1) / kNR;
  const int64_t iblocks = (M + 3) / 4;

  std::vector<float>& bpack = bpack_buf();
  if (int64_t(bpack.size()) < panels * K * kNR) bpack.resize(panels * K * kNR);
  parallel_for(panels, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const int64_t j0 = p * kNR;
      const int cols = int(std::min<int64_t>(kNR, N - j0));
      float* dst = bpack.data() + size_t(p) * K * kNR;
      if (cols == kNR) {
        for (int64_t k = 0; k < K; ++k) {
          const float* src = B + k * N + j0;
          for (int t = 0; t < kNR; ++t) dst[k * kNR + t] = src[t];
        }
      } else {
        for (int64_t k = 0; k < K; ++k) {
          const float* src = B + k * N + j0;
          for (int t = 0; t < cols; ++t) dst[k * kNR + t] = src[t];
          for (int t = cols; t < kNR; ++t) dst[k * kNR + t] = 0.0f;
        }
      }
    }
  });

  std::vector<double>& apack = apack_buf();
  if (int64_t(apack.size()) < iblocks * K * 4) apack.resize(iblocks * K * 4);
  parallel_for(iblocks, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      const int64_t i0 = b * 4;
      const int rows = int(std::min<int64_t>(4, M - i0));
      double* dst = apack.data() + size_t(b) * K * 4;
      for (int64_t k = 0; k < K; ++k) {
        for (int r = 0; r < rows; ++r) dst[k * 4 + r] = double(A[(i0 + r) * K + k]);
        for (int r = rows; r < 4; ++r) dst[k * 4 + r] = 0.0;
      }
    }
  });

  const int64_t strip = std::max<int64_t>(1, (1 << 20) / (K * kNR * 4));
  for (int64_t ps = 0; ps < panels; ps += strip) {
    const int64_t pe = std::min(panels, ps + strip);
    parallel_for(iblocks, [&](int64_t b0, int64_t b1) {
      for (int64_t b = b0; b < b1; ++b) {
        const int64_t i0 = b * 4;
        const int rows = int(std::min<int64_t>(4, M - i0));
        const double* ap = apack.data() + size_t(b) * K * 4;
        for (int64_t p = ps; p < pe; ++p) {
          const int64_t j0 = p * kNR;
          const int cols = int(std::min<int64_t>(kNR, N - j0));
          nn_micro(ap, bpack.data() + size_t(p) * K * kNR, C + i0 * N + j0, N,
                   K, rows, cols, accumulate);
        }
      }
    });
  }
}

namespace {

// Dot products of one A row against JB rows of B, lane-split accumulators
// reduced in a fixed order.
template <int JB>
void nt_block(const float* a, const float* B, double* out, int64_t K,
              int64_t ldb) {
  double lanes[JB][4] = {};
  int64_t k = 0;
  for (; k + 4 <= K; k += 4) {
    double av[4];
    for (int t = 0; t < 4; ++t) av[t] = double(a[k + t]);
    for (int j = 0; j < JB; ++j) {
      const float* b = B + j * ldb + k;
      for (int t = 0; t < 4; ++t) lanes[j][t] += av[t] * double(b[t]);
    }
  }
  for (; k < K; ++k)
    for (int j = 0; j < JB; ++j)
      lanes[j][0] += double(a[k]) * double(B[j * ldb + k]);
  for (int j = 0; j < JB; ++j)
    out[j] = (lanes[j][0] + lanes[j][1]) + (lanes[j][2] + lanes[j][3]);
}

}  // namespace

void gemm_nt(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate) {
  parallel_for(M, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const float* a = A + i * K;
      float* crow = C + i * N;
      int64_t j = 0;
      double out[4];
      for (; j + 4 <= N; j += 4) {
        nt_block<4>(a, B + j * K, out, K, K);
        for (int t = 0; t < 4; ++t)
          crow[j + t] = accumulate ? crow[j + t] + float(out[t]) : float(out[t]);
      }
      for (; j < N; ++j) {
        nt_block<1>(a, B + j * K, out, K, K);
        crow[j] = accumulate ? crow[j] + float(out[0]) : float(out[0]);
      }
    }
  });
}

void gemm_tn(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate) {
  // Pack A^T once, then reuse the nn kernel.
  std::vector<float> at(size_t(M) * size_t(K));
  parallel_for(M, [&](int64_t m0, int64_t m1) {
    for (int64_t m = m0; m < m1; ++m)
      for (int64_t k = 0; k < K; ++k) at[size_t(m) * K + k] = A[k * M + m];
  });
  gemm_nn(at.data(), B, C, M, N, K, accumulate);
}

}  // namespace mitu
