#include <algorithm>
#include <vector>

#include "mitu/errors.hpp"
#include "mitu/gemm.hpp"
#include "mitu/parallel.hpp"
#include "mitu/tensor.hpp"

namespace mitu {

namespace detail {
bool tracing(std::initializer_list<const Tensor*> ins);
void mark_traced(Tensor& out);
void check_finite(const Tensor& t, const char* op);
}  // namespace detail

using detail::mark_traced;
using detail::tracing;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor out = Tensor::zeros({M, N});
  gemm_nn(a.data(), b.data(), out.data(), M, N, K);
  detail::check_finite(out, "matmul");
  if (tracing({&a, &b})) {
    mark_traced(out);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    active_tape()->record("matmul", oi, [ai, bi, oi, M, N, K] {
      const float* go = oi->grad.data();
      if (ai->requires_grad)
        gemm_nt(go, bi->data.data(), ai->ensure_grad().data(), M, K, N, true);
      if (bi->requires_grad)
        gemm_tn(ai->data.data(), go, bi->ensure_grad().data(), K, N, M, true);
    });
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b, double scale) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0))
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int64_t B = a.dim(0), M = a.dim(1), K = a.dim(2);
  const int64_t N = trans_b ? b.dim(1) : b.dim(2);
  const int64_t bk = trans_b ? b.dim(2) : b.dim(1);
  if (bk != K)
    throw ShapeError("bmm: contraction mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor out = Tensor::zeros({B, M, N});
  for (int64_t i = 0; i < B; ++i) {
    const float* pa = a.data() + i * M * K;
    const float* pb = b.data() + i * K * N;
    float* po = out.data() + i * M * N;
    if (trans_b)
      gemm_nt(pa, pb, po, M, N, K);
    else
      gemm_nn(pa, pb, po, M, N, K);
  }
  if (scale != 1.0) {
    float* po = out.data();
    const int64_t n = out.numel();
    parallel_for(n, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) po[i] = float(scale * double(po[i]));
    });
  }
  detail::check_finite(out, "bmm");
  if (tracing({&a, &b})) {
    mark_traced(out);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    active_tape()->record("bmm", oi, [ai, bi, oi, B, M, N, K, trans_b, scale] {
      std::vector<float> gs;  // scaled upstream gradient
      const float* go = oi->grad.data();
      if (scale != 1.0) {
        gs.resize(size_t(B * M * N));
        for (int64_t i = 0; i < B * M * N; ++i) gs[size_t(i)] = float(scale * double(go[i]));
        go = gs.data();
      }
      for (int64_t i = 0; i < B; ++i) {
        const float* gy = go + i * M * N;
        const float* pa = ai->data.data() + i * M * K;
        const float* pb = bi->data.data() + i * K * N;
        if (ai->requires_grad) {
          float* ga = ai->ensure_grad().data() + i * M * K;
          if (trans_b)
            gemm_nn(gy, pb, ga, M, K, N, true);
          else
            gemm_nt(gy, pb, ga, M, K, N, true);
        }
        if (bi->requires_grad) {
          float* gb = bi->ensure_grad().data() + i * K * N;
          if (trans_b)
            gemm_tn(gy, pa, gb, N, K, M, true);
          else
            gemm_tn(pa, gy, gb, K, N, M, true);
        }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2)
    throw ShapeError("linear: weight must be [C_out,C_in], got " + shape_str(weight.shape()));
  const int64_t ci = weight.dim(1), co = weight.dim(0);
  if (x.dim(x.rank() - 1) != ci)
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co))
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) + " != [" +
                     std::to_string(co) + "]");
  const int64_t rows = x.numel() / ci;

  std::vector<int64_t> out_shape = x.shape();
  out_shape.back() = co;
  Tensor out = Tensor::zeros(out_shape);

  // W^T once, then the fast nn path.
  std::vector<float> wt(size_t(ci) * co);
  const float* pw = weight.data();
  for (int64_t c = 0; c < co; ++c)
    for (int64_t i = 0; i < ci; ++i) wt[size_t(i) * co + c] = pw[c * ci + i];
  gemm_nn(x.data(), wt.data(), out.data(), rows, co, ci);

  if (bias.defined()) {
    const float* pb = bias.data();
    float* po = out.data();
    parallel_for(rows, [&](int64_t r0, int64_t r1) {
      for (int64_t r = r0; r < r1; ++r) {
        float* row = po + r * co;
        for (int64_t c = 0; c < co; ++c) row[c] += pb[c];
      }
    });
  }
  detail::check_finite(out, "linear");

  if (tracing({&x, &weight, &bias})) {
    mark_traced(out);
    auto xi = x.impl, wi = weight.impl, oi = out.impl;
    auto bi = bias.defined() ? bias.impl : nullptr;
    active_tape()->record("linear", oi, [xi, wi, bi, oi, rows, ci, co] {
      const float* go = oi->grad.data();
      if (xi->requires_grad)
        gemm_nn(go, wi->data.data(), xi->ensure_grad().data(), rows, ci, co, true);
      if (wi->requires_grad)
        gemm_tn(go, xi->data.data(), wi->ensure_grad().data(), co, ci, rows, true);
      if (bi && bi->requires_grad) {
        float* gb = bi->ensure_grad().data();
        for (int64_t c = 0; c < co; ++c) {
          double acc = 0.0;
          for (int64_t r = 0; r < rows; ++r) acc += double(go[r * co + c]);
          gb[c] += float(acc);
        }
      }
    });
  }
  return out;
}

}  // namespace mitu
