#pragma once

#include <cstdint>

namespace mitu {

// Dense single-precision matrix kernels with 64-bit accumulation along the
// contraction axis. All matrices are row-major. Output is overwritten unless
// `accumulate` is set, in which case results are added into C.
//
// gemm_nn:  C[M,N] = A[M,K] * B[K,N]
// gemm_nt:  C[M,N] = A[M,K] * B[N,K]^T
// gemm_tn:  C[M,N] = A[K,M]^T * B[K,N]
void gemm_nn(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate = false);
void gemm_nt(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate = false);
void gemm_tn(const float* A, const float* B, float* C, int64_t M, int64_t N,
             int64_t K, bool accumulate = false);

}  // namespace mitu
