#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mitu {

// Dense row-major float32 tensor. Reductions inside every operation
// accumulate in float64. Gradients are held next to the data and are
// populated by Tape::backward with += semantics.
struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool from_op = false;  // produced by a recorded operation (non-leaf)

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
  }
  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(size_t(numel()), 0.0f);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl(std::move(impl)) {}

  static Tensor zeros(const std::vector<int64_t>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<int64_t>& shape, float value);
  static Tensor from_data(const std::vector<int64_t>& shape, std::vector<float> values);
  static Tensor scalar(float value) { return from_data({1}, {value}); }

  bool defined() const { return impl != nullptr; }
  const std::vector<int64_t>& shape() const { return impl->shape; }
  int rank() const { return int(impl->shape.size()); }
  int64_t dim(int i) const { return impl->shape[size_t(i)]; }
  int64_t numel() const { return impl->numel(); }

  float* data() { return impl->data.data(); }
  const float* data() const { return impl->data.data(); }
  float& at(int64_t i) { return impl->data[size_t(i)]; }
  float at(int64_t i) const { return impl->data[size_t(i)]; }

  bool requires_grad() const { return impl->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl->requires_grad = v;
    return *this;
  }
  bool has_grad() const { return !impl->grad.empty(); }
  const float* grad() const { return impl->grad.data(); }
  float* grad() { return impl->grad.data(); }
  void zero_grad() {
    if (!impl->grad.empty()) std::fill(impl->grad.begin(), impl->grad.end(), 0.0f);
  }

  // Value of a scalar (single-element) tensor.
  float item() const;

  std::shared_ptr<TensorImpl> impl;
};

std::string shape_str(const std::vector<int64_t>& s);

// Reverse-mode tape. Operations append entries in execution order; backward
// replays them in reverse insertion order, which is a valid topological order
// by construction.
class Tape {
 public:
  void record(const char* op, std::shared_ptr<TensorImpl> out, std::function<void()> backward);

  // Seeds d(loss)=1 and sweeps the tape in reverse. Non-leaf gradients are
  // reset at the start of every call, so leaf gradients accumulate across
  // calls (two backward calls without zero_grad double them).
  void backward(const Tensor& loss);

  void clear() { entries_.clear(); }
  size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    const char* op;
    std::shared_ptr<TensorImpl> out;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
};

// The tape operations record onto, if any. Forward-only execution (no scope
// active) skips recording entirely.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Convenience: backward on the active tape.
void backward(const Tensor& loss);

// Forward outputs are scanned for NaN/Inf when enabled (default: on in debug
// builds only).
void set_finite_checks(bool on);

// ---- elementwise / scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divt(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);  // scale*x + shift
Tensor logt(const Tensor& x);
Tensor clampt(const Tensor& x, double lo, double hi);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact Gaussian-CDF form

// ---- reductions ----
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor sum_channels(const Tensor& x);  // [B,C,H,W] -> [C]

// ---- shape ----
Tensor reshape(const Tensor& x, const std::vector<int64_t>& shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // 4D, axis 1
Tensor tokens_to_grid(const Tensor& x, int64_t h, int64_t w);  // [B,N,C] -> [B,C,h,w]
Tensor grid_to_tokens(const Tensor& x);                        // [B,C,h,w] -> [B,h*w,C]
Tensor split_heads(const Tensor& x, int64_t heads);  // [B,N,C] -> [B*heads,N,C/heads]
Tensor merge_heads(const Tensor& x, int64_t batch);  // [B*h,N,d] -> [B,N,h*d]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K]x[K,N]
// Batched product; trans_b multiplies by B transposed in its last two axes.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false, double scale = 1.0);
// x [..., C_in] times W[C_out, C_in]^T plus optional bias[C_out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---- conv / norm / resize ----
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding, int groups = 1);
Tensor softmax(const Tensor& x, int axis);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-6);  // over last axis
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   Tensor& running_mean, Tensor& running_var, bool training,
                   double momentum = 0.1, double eps = 1e-5);
Tensor upsample2x_bilinear(const Tensor& x);  // align_corners=false

}  // namespace mitu
