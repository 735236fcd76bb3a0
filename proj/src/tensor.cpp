#include "mitu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mitu/errors.hpp"
#include "mitu/parallel.hpp"

namespace mitu {

namespace {

thread_local Tape* g_tape = nullptr;

}  // namespace

Tape* active_tape() { return g_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = prev_; }

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(const std::vector<int64_t>& shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  for (int64_t e : shape)
    if (e <= 0) throw ShapeError("tensor extent must be positive, got " + shape_str(shape));
  impl->data.assign(size_t(impl->numel()), 0.0f);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::full(const std::vector<int64_t>& shape, float value) {
  Tensor t = zeros(shape);
  std::fill(t.impl->data.begin(), t.impl->data.end(), value);
  return t;
}

Tensor Tensor::from_data(const std::vector<int64_t>& shape, std::vector<float> values) {
  Tensor t = zeros(shape);
  if (int64_t(values.size()) != t.numel())
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  t.impl->data = std::move(values);
  return t;
}

float Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() requires a scalar tensor, got shape " + shape_str(shape()));
  return impl->data[0];
}

void Tape::record(const char* op, std::shared_ptr<TensorImpl> out,
                  std::function<void()> backward) {
  entries_.push_back({op, std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  bool on_tape = false;
  for (const auto& e : entries_)
    if (e.out == loss.impl) on_tape = true;
  if (!on_tape) throw ShapeError("backward: loss tensor was not produced on this tape");

  // Non-leaf gradients are released at the end of every sweep, so they start
  // empty here; only the seed is needed. Leaf gradients persist and keep
  // accumulating across calls.
  loss.impl->ensure_grad();
  loss.impl->grad[0] = 1.0f;

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // nothing downstream consumed it
    it->fn();
    // This entry's output gradient has been fully consumed: every consumer
    // was recorded later and therefore already processed.
    it->out->grad.clear();
    it->out->grad.shrink_to_fit();
  }
}

void backward(const Tensor& loss) {
  Tape* t = active_tape();
  if (!t) throw ShapeError("backward: no active tape");
  t->backward(loss);
}

// ---------------------------------------------------------------------------
// shared op plumbing
// ---------------------------------------------------------------------------

namespace detail {

bool tracing(std::initializer_list<const Tensor*> ins) {
  if (!g_tape) return false;
  for (const Tensor* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void mark_traced(Tensor& out) {
  out.impl->requires_grad = true;
  out.impl->from_op = true;
}

namespace {
bool g_finite_checks =
#ifdef NDEBUG
    false;
#else
    true;
#endif
}  // namespace

void check_finite(const Tensor& t, const char* op) {
  if (!g_finite_checks) return;
  const float* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i]))
      throw std::logic_error(std::string(op) + " produced a non-finite value at index " +
                             std::to_string(i));
}

}  // namespace detail

void set_finite_checks(bool on) { detail::g_finite_checks = on; }

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace {

using detail::mark_traced;
using detail::tracing;

Tensor make_like(const std::vector<int64_t>& shape) { return Tensor::zeros(shape); }

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

// Elementwise binary op with gradients; fa/fb give d(out)/da and d(out)/db.
template <typename F, typename Ga, typename Gb>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, Ga ga, Gb gb) {
  check_same_shape(name, a, b);
  const int64_t n = a.numel();
  Tensor out = make_like(a.shape());
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  parallel_for(n, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) po[i] = float(f(double(pa[i]), double(pb[i])));
  });
  detail::check_finite(out, name);
  if (tracing({&a, &b})) {
    mark_traced(out);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    g_tape->record(name, oi, [ai, bi, oi, ga, gb, n] {
      const float* go = oi->grad.data();
      if (ai->requires_grad) {
        float* g = ai->ensure_grad().data();
        const float* pa = ai->data.data();
        const float* pb = bi->data.data();
        for (int64_t i = 0; i < n; ++i)
          g[i] += float(ga(double(go[i]), double(pa[i]), double(pb[i])));
      }
      if (bi->requires_grad) {
        float* g = bi->ensure_grad().data();
        const float* pa = ai->data.data();
        const float* pb = bi->data.data();
        for (int64_t i = 0; i < n; ++i)
          g[i] += float(gb(double(go[i]), double(pa[i]), double(pb[i])));
      }
    });
  }
  return out;
}

template <typename F, typename G>
Tensor unary_op(const char* name, const Tensor& x, F f, G dfdx) {
  const int64_t n = x.numel();
  Tensor out = make_like(x.shape());
  const float* px = x.data();
  float* po = out.data();
  parallel_for(n, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) po[i] = float(f(double(px[i])));
  });
  detail::check_finite(out, name);
  if (tracing({&x})) {
    mark_traced(out);
    auto xi = x.impl, oi = out.impl;
    g_tape->record(name, oi, [xi, oi, dfdx, n] {
      const float* go = oi->grad.data();
      float* g = xi->ensure_grad().data();
      const float* px = xi->data.data();
      for (int64_t i = 0; i < n; ++i) g[i] += float(double(go[i]) * dfdx(double(px[i])));
    });
  }
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor divt(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary_op(
      "affine", x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double) { return scale; });
}

Tensor logt(const Tensor& x) {
  return unary_op(
      "log", x, [](double v) { return std::log(v); },
      [](double v) { return 1.0 / v; });
}

Tensor clampt(const Tensor& x, double lo, double hi) {
  return unary_op(
      "clamp", x,
      [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return unary_op(
      "gelu", x,
      [](double v) { return v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  const int64_t n = x.numel();
  double acc = 0.0;
  const float* px = x.data();
  for (int64_t i = 0; i < n; ++i) acc += double(px[i]);
  Tensor out = Tensor::scalar(float(acc));
  if (tracing({&x})) {
    mark_traced(out);
    auto xi = x.impl, oi = out.impl;
    g_tape->record("sum", oi, [xi, oi, n] {
      const float g = oi->grad[0];
      float* gx = xi->ensure_grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) { return affine(sum_all(x), 1.0 / double(x.numel()), 0.0); }

Tensor sum_channels(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("sum_channels expects [B,C,H,W], got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out = Tensor::zeros({C});
  const float* px = x.data();
  float* po = out.data();
  parallel_for(C, [&](int64_t c0, int64_t c1) {
    for (int64_t c = c0; c < c1; ++c) {
      double acc = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const float* p = px + (b * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) acc += double(p[i]);
      }
      po[c] = float(acc);
    }
  });
  if (tracing({&x})) {
    mark_traced(out);
    auto xi = x.impl, oi = out.impl;
    g_tape->record("sum_channels", oi, [xi, oi, B, C, HW] {
      const float* go = oi->grad.data();
      float* gx = xi->ensure_grad().data();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          float* p = gx + (b * C + c) * HW;
          const float g = go[c];
          for (int64_t i = 0; i < HW; ++i) p[i] += g;
        }
    });
  }
  return out;
}

}  // namespace mitu
