#include "vqa/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vqa/errors.hpp"

namespace vqa {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
using BackwardFn = std::function<void(TensorNode<T>&)>;

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn) {
  std::vector<Tensor<T>> ins;
  ins.reserve(inputs.size());
  for (const auto* in : inputs) ins.push_back(*in);
  return record_op<T>(std::move(shape), std::move(data), op, std::move(ins), std::move(fn));
}

template <typename T>
const std::vector<T>& input_data(const TensorNode<T>& self, std::size_t i) {
  return self.inputs[i]->data;
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
  return strides;
}

struct BroadcastPlan {
  Shape out;
  Shape a_strides;
  Shape b_strides;
  bool same_shape = false;
  bool b_scalar = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan p;
  if (a == b) {
    p.out = a;
    p.same_shape = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.resize(r);
  p.a_strides.assign(r, 0);
  p.b_strides.assign(r, 0);
  const Shape as = row_major_strides(a);
  const Shape bs = row_major_strides(b);
  for (std::size_t i = 0; i < r; ++i) {
    const bool has_a = i >= r - a.size();
    const bool has_b = i >= r - b.size();
    const std::size_t da = has_a ? a[i - (r - a.size())] : 1;
    const std::size_t db = has_b ? b[i - (r - b.size())] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    p.out[i] = std::max(da, db);
    if (has_a && da == p.out[i]) p.a_strides[i] = as[i - (r - a.size())];
    if (has_b && db == p.out[i]) p.b_strides[i] = bs[i - (r - b.size())];
  }
  p.b_scalar = shape_numel(b) == 1 && shape_numel(a) == shape_numel(p.out);
  return p;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const std::size_t n = shape_numel(p.out);
  if (p.same_shape) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (p.b_scalar) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
    return;
  }
  const std::size_t r = p.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t io = 0; io < n; ++io) {
    f(io, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += p.a_strides[d];
      ib += p.b_strides[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.a_strides[d] * p.out[d];
      ib -= p.b_strides[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

// f(x, y) -> value; da(x, y) and db(x, y) are the partial derivatives.
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  BroadcastPlan plan = plan_broadcast(a.shape(), b.shape(), name);
  std::vector<T> out(shape_numel(plan.out));
  const auto& x = a.node().data;
  const auto& y = b.node().data;
  for_each_broadcast(plan, [&](std::size_t io, std::size_t ia, std::size_t ib) { out[io] = f(x[ia], y[ib]); });
  Shape out_shape = plan.out;
  return make_result<T>(std::move(out_shape), std::move(out), name, {&a, &b},
                        [plan = std::move(plan), da, db](TensorNode<T>& self) {
                          const auto& x = input_data(self, 0);
                          const auto& y = input_data(self, 1);
                          T* gx = input_grad(self, 0);
                          T* gy = input_grad(self, 1);
                          const auto& g = self.grad;
                          for_each_broadcast(plan, [&](std::size_t io, std::size_t ia, std::size_t ib) {
                            if (gx) gx[ia] += g[io] * da(x[ia], y[ib]);
                            if (gy) gy[ib] += g[io] * db(x[ia], y[ib]);
                          });
                        });
}

// f(x) -> y; df(x, y) is dy/dx.
template <typename T, typename F, typename DF>
Tensor<T> unary_op(const char* name, const Tensor<T>& a, F f, DF df) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  const T* __restrict x = a.node().data.data();
  T* __restrict y = out.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  return make_result<T>(a.shape(), std::move(out), name, {&a}, [df](TensorNode<T>& self) {
    T* __restrict gx = input_grad(self, 0);
    if (!gx) return;
    const T* __restrict x = input_data(self, 0).data();
    const T* __restrict y = self.data.data();
    const T* __restrict g = self.grad.data();
    const std::size_t n = self.data.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
  }
}

void require_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
}

// Splits a shape around an axis into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  r.length = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

struct ConvGeometry {
  std::size_t batch, c_in, h, w, c_out, kh, kw, stride, pad, h_out, w_out;
  bool batched;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t positions() const { return h_out * w_out; }
};

// Samples per GEMM: enough to fill ~64K scratch values, which keeps the
// column buffer cache resident; small 1x1 maps get batched.
std::size_t conv_chunk(const ConvGeometry& g) {
  const std::size_t per_sample = std::max(g.patch(), g.c_out) * g.positions();
  return std::clamp<std::size_t>((std::size_t{1} << 16) / per_sample, 1, g.batch);
}

// Output columns [lo, hi) of kernel column kj read inside the input row.
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_columns(const ConvGeometry& g, std::size_t kj) {
  const auto w = static_cast<std::ptrdiff_t>(g.w), s = static_cast<std::ptrdiff_t>(g.stride);
  const auto shift = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad);
  // ox * s + shift in [0, w)
  std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  std::ptrdiff_t hi = (w - 1 - shift) < 0 ? 0 : (w - 1 - shift) / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(g.w_out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// cols is [patch x ld] row-major; this sample's columns start at cols[0].
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols, std::size_t ld) {
  const std::size_t p = ld;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.w_out;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.w_out, T(0));
            continue;
          }
          const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const auto [lo, hi] = valid_columns(g, kj);
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + (lo + kj - g.pad), src + (hi + kj - g.pad), dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + kj - g.pad];
          }
          std::fill(dst + hi, dst + g.w_out, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx, std::size_t ld) {
  const std::size_t p = ld;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const T* src = row + oy * g.w_out;
          const auto [lo, hi] = valid_columns(g, kj);
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + kj - g.pad] += src[ox];
        }
      }
    }
  }
}

}  // namespace

// --- linear algebra -------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul", "lhs");
  require_rank(b.shape(), 2, "matmul", "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " . " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  MatMap<T>(out.data(), m, n).noalias() =
      ConstMatMap<T>(a.node().data.data(), m, k) * ConstMatMap<T>(b.node().data.data(), k, n);
  return make_result<T>({m, n}, std::move(out), "matmul", {&a, &b}, [m, k, n](TensorNode<T>& self) {
    ConstMatMap<T> dc(self.grad.data(), m, n);
    if (T* ga = input_grad(self, 0)) {
      MatMap<T>(ga, m, k).noalias() += dc * ConstMatMap<T>(input_data(self, 1).data(), k, n).transpose();
    }
    if (T* gb = input_grad(self, 1)) {
      MatMap<T>(gb, k, n).noalias() += ConstMatMap<T>(input_data(self, 0).data(), m, k).transpose() * dc;
    }
  });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 3, "bmm", "lhs");
  require_rank(b.shape(), 3, "bmm", "rhs");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != batch || b.dim(1) != k) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    MatMap<T>(out.data() + i * m * n, m, n).noalias() =
        ConstMatMap<T>(a.node().data.data() + i * m * k, m, k) * ConstMatMap<T>(b.node().data.data() + i * k * n, k, n);
  }
  return make_result<T>({batch, m, n}, std::move(out), "bmm", {&a, &b}, [batch, m, k, n](TensorNode<T>& self) {
    T* ga = input_grad(self, 0);
    T* gb = input_grad(self, 1);
    const T* da = input_data(self, 0).data();
    const T* db = input_data(self, 1).data();
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMatMap<T> dc(self.grad.data() + i * m * n, m, n);
      if (ga) MatMap<T>(ga + i * m * k, m, k).noalias() += dc * ConstMatMap<T>(db + i * k * n, k, n).transpose();
      if (gb) MatMap<T>(gb + i * k * n, k, n).noalias() += ConstMatMap<T>(da + i * m * k, m, k).transpose() * dc;
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(weight.shape(), 2, "linear", "weight");
  const std::size_t out_f = weight.dim(0), in_f = weight.dim(1);
  if (x.rank() < 1 || x.rank() > 2 || x.shape().back() != in_f) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_f)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  std::vector<T> out(rows * out_f);
  MatMap<T> y(out.data(), rows, out_f);
  y.noalias() = ConstMatMap<T>(x.node().data.data(), rows, in_f) *
                ConstMatMap<T>(weight.node().data.data(), out_f, in_f).transpose();
  if (bias.defined()) {
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.node().data.data(), out_f);
  }
  Shape shape = x.rank() == 2 ? Shape{rows, out_f} : Shape{out_f};
  return make_result<T>(std::move(shape), std::move(out), "linear", {&x, &weight, &bias},
                        [rows, in_f, out_f](TensorNode<T>& self) {
                          ConstMatMap<T> dy(self.grad.data(), rows, out_f);
                          if (T* gx = input_grad(self, 0)) {
                            MatMap<T>(gx, rows, in_f).noalias() +=
                                dy * ConstMatMap<T>(input_data(self, 1).data(), out_f, in_f);
                          }
                          if (T* gw = input_grad(self, 1)) {
                            MatMap<T>(gw, out_f, in_f).noalias() +=
                                dy.transpose() * ConstMatMap<T>(input_data(self, 0).data(), rows, in_f);
                          }
                          if (self.inputs[2]) {
                            if (T* gb = input_grad(self, 2)) {
                              // Plain loops: Eigen's vectorized reductions peel by address,
                              // which makes the rounding depend on where the heap put dy.
                              for (std::size_t r = 0; r < rows; ++r) {
                                const T* __restrict row = self.grad.data() + r * out_f;
                                for (std::size_t j = 0; j < out_f; ++j) gb[j] += row[j];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding) {
  require_rank(kernels.shape(), 4, "conv2d", "kernels");
  if (input.rank() != 3 && input.rank() != 4) {
    throw DimensionError("conv2d: input must be [C x H x W] or [N x C x H x W], got " + shape_str(input.shape()));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.batched = input.rank() == 4;
  const std::size_t off = g.batched ? 1 : 0;
  g.batch = g.batched ? input.dim(0) : 1;
  g.c_in = input.dim(off);
  g.h = input.dim(off + 1);
  g.w = input.dim(off + 2);
  g.c_out = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernels.dim(1) != g.c_in) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) + " has " + std::to_string(g.c_in) +
                         " channels but kernels " + shape_str(kernels.shape()) + " expect " +
                         std::to_string(kernels.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.c_out)) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(g.c_out) +
                         " output channels");
  }
  const std::size_t ph = g.h + 2 * padding, pw = g.w + 2 * padding;
  if (g.kh > ph || g.kw > pw) {
    throw ConfigError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                      " exceeds padded input " + std::to_string(ph) + "x" + std::to_string(pw));
  }
  if ((ph - g.kh) % stride != 0 || (pw - g.kw) % stride != 0) {
    throw ConfigError("conv2d: output size is not integral for input " + shape_str(input.shape()) + ", kernel " +
                      std::to_string(g.kh) + "x" + std::to_string(g.kw) + ", stride " + std::to_string(stride) +
                      ", padding " + std::to_string(padding));
  }
  g.h_out = (ph - g.kh) / stride + 1;
  g.w_out = (pw - g.kw) / stride + 1;

  const std::size_t in_sz = g.c_in * g.h * g.w;
  const std::size_t out_sz = g.c_out * g.positions();
  const std::size_t pos = g.positions();
  const std::size_t chunk = conv_chunk(g);
  std::vector<T> out(g.batch * out_sz);
  std::vector<T> cols(g.patch() * chunk * pos);
  std::vector<T> ys(chunk > 1 ? g.c_out * chunk * pos : 0);
  ConstMatMap<T> wm(kernels.node().data.data(), g.c_out, g.patch());
  for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
    const std::size_t b = std::min(chunk, g.batch - n0);
    const std::size_t ld = b * pos;
    for (std::size_t i = 0; i < b; ++i) im2col(input.node().data.data() + (n0 + i) * in_sz, g, cols.data() + i * pos, ld);
    // A single sample's [C_out x P] block is already in output layout.
    MatMap<T> y(b == 1 ? out.data() + n0 * out_sz : ys.data(), g.c_out, ld);
    y.noalias() = wm * ConstMatMap<T>(cols.data(), g.patch(), ld);
    if (bias.defined()) {
      y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.node().data.data(), g.c_out);
    }
    if (b == 1) continue;
    // [C_out x (b*P)] -> b x [C_out x P]
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t c = 0; c < g.c_out; ++c) {
        std::copy_n(ys.data() + c * ld + i * pos, pos, out.data() + (n0 + i) * out_sz + c * pos);
      }
    }
  }
  Shape shape = g.batched ? Shape{g.batch, g.c_out, g.h_out, g.w_out} : Shape{g.c_out, g.h_out, g.w_out};
  return make_result<T>(std::move(shape), std::move(out), "conv2d", {&input, &kernels, &bias},
                        [g](TensorNode<T>& self) {
                          T* gx = input_grad(self, 0);
                          T* gk = input_grad(self, 1);
                          T* gb = self.inputs[2] ? input_grad(self, 2) : nullptr;
                          const auto& x = input_data(self, 0);
                          ConstMatMap<T> wm(input_data(self, 1).data(), g.c_out, g.patch());
                          const std::size_t in_sz = g.c_in * g.h * g.w;
                          const std::size_t pos = g.positions();
                          const std::size_t out_sz = g.c_out * pos;
                          const std::size_t chunk = conv_chunk(g);
                          std::vector<T> cols(gk ? g.patch() * chunk * pos : 0);
                          std::vector<T> dcols(gx ? g.patch() * chunk * pos : 0);
                          std::vector<T> dys(chunk > 1 ? g.c_out * chunk * pos : 0);
                          for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
                            const std::size_t b = std::min(chunk, g.batch - n0);
                            const std::size_t ld = b * pos;
                            const T* dy_data = self.grad.data() + n0 * out_sz;
                            if (b > 1) {
                              for (std::size_t i = 0; i < b; ++i) {
                                for (std::size_t c = 0; c < g.c_out; ++c) {
                                  std::copy_n(self.grad.data() + (n0 + i) * out_sz + c * pos, pos,
                                              dys.data() + c * ld + i * pos);
                                }
                              }
                              dy_data = dys.data();
                            }
                            ConstMatMap<T> dy(dy_data, g.c_out, ld);
                            if (gk) {
                              for (std::size_t i = 0; i < b; ++i) {
                                im2col(x.data() + (n0 + i) * in_sz, g, cols.data() + i * pos, ld);
                              }
                              MatMap<T>(gk, g.c_out, g.patch()).noalias() +=
                                  dy * ConstMatMap<T>(cols.data(), g.patch(), ld).transpose();
                            }
                            if (gx) {
                              MatMap<T>(dcols.data(), g.patch(), ld).noalias() = wm.transpose() * dy;
                              for (std::size_t i = 0; i < b; ++i) {
                                col2im_add(dcols.data() + i * pos, g, gx + (n0 + i) * in_sz, ld);
                              }
                            }
                            if (gb) {
                              for (std::size_t c = 0; c < g.c_out; ++c) {
                                const T* row = dy_data + c * ld;
                                T acc = T(0);
                                for (std::size_t p = 0; p < ld; ++p) acc += row[p];
                                gb[c] += acc;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, std::size_t window) {
  if (input.rank() < 2) throw DimensionError("avg_pool2d: input needs at least 2 dims, got " + shape_str(input.shape()));
  if (window == 0) throw ConfigError("avg_pool2d: window must be positive");
  const std::size_t h = input.shape()[input.rank() - 2], w = input.shape().back();
  if (h % window != 0 || w % window != 0) {
    throw ConfigError("avg_pool2d: " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by window " +
                      std::to_string(window));
  }
  const std::size_t ho = h / window, wo = w / window;
  const std::size_t planes = input.numel() / (h * w);
  const T inv = T(1) / static_cast<T>(window * window);
  std::vector<T> out(planes * ho * wo, T(0));
  const auto& x = input.node().data;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = x.data() + (p * h + y) * w;
      T* dst = out.data() + (p * ho + y / window) * wo;
      for (std::size_t ox = 0; ox < wo; ++ox) {
        T acc = T(0);
        for (std::size_t k = 0; k < window; ++k) acc += src[ox * window + k];
        dst[ox] += acc * inv;
      }
    }
  }
  Shape shape = input.shape();
  shape[shape.size() - 2] = ho;
  shape.back() = wo;
  return make_result<T>(std::move(shape), std::move(out), "avg_pool2d", {&input},
                        [planes, h, w, ho, wo, window, inv](TensorNode<T>& self) {
                          T* gx = input_grad(self, 0);
                          if (!gx) return;
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t y = 0; y < h; ++y) {
                              T* __restrict dst = gx + (p * h + y) * w;
                              const T* __restrict src = self.grad.data() + (p * ho + y / window) * wo;
                              for (std::size_t ox = 0; ox < wo; ++ox) {
                                const T g = src[ox] * inv;
                                for (std::size_t k = 0; k < window; ++k) dst[ox * window + k] += g;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary_op<T>(
      "add_scalar", a, [value](T x) { return x + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary_op<T>(
      "scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary_op<T>(
      "neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary_op<T>(
      "square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary_op<T>(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); }, [](T, T y) { return y > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary_op<T>(
      "sigmoid", a, [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary_op<T>(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary_op<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary_op<T>(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary_op<T>(
      "sqrt", a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> elementwise(Elementwise op, const Tensor<T>& a, const Tensor<T>& b) {
  auto need_b = [&] {
    if (!b.defined()) throw UsageError("elementwise: binary op requires a second operand");
  };
  switch (op) {
    case Elementwise::kAdd: need_b(); return add(a, b);
    case Elementwise::kSub: need_b(); return sub(a, b);
    case Elementwise::kMul: need_b(); return mul(a, b);
    case Elementwise::kSquare: return square(a);
    case Elementwise::kRelu: return relu(a);
    case Elementwise::kSigmoid: return sigmoid(a);
    case Elementwise::kTanh: return tanh(a);
  }
  throw UsageError("elementwise: unknown op");
}

// --- reductions -----------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.node().data) total += v;
  return make_result<T>({1}, {total}, "sum", {&a}, [](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const std::size_t n = self.inputs[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis, bool keepdim) {
  require_axis(a.shape(), axis, "sum");
  const AxisSplit s = split_axis(a.shape(), axis);
  std::vector<T> out(s.outer * s.inner, T(0));
  const auto& x = a.node().data;
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.length; ++k)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += x[(o * s.length + k) * s.inner + i];
  Shape shape = a.shape();
  if (keepdim) {
    shape[axis] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (shape.empty()) shape.push_back(1);
  }
  return make_result<T>(std::move(shape), std::move(out), "sum_axis", {&a}, [s](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.length; ++k)
        for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.length + k) * s.inner + i] += self.grad[o * s.inner + i];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis, bool keepdim) {
  require_axis(a.shape(), axis, "mean");
  return scale(sum(a, axis, keepdim), T(1) / static_cast<T>(a.dim(axis)));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  require_axis(a.shape(), axis, "softmax");
  const AxisSplit s = split_axis(a.shape(), axis);
  const auto& x = a.node().data;
  std::vector<T> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.length; ++k) {
        const T v = x[base + k * s.inner];
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
        mx = std::max(mx, v);
      }
      T total = T(0);
      for (std::size_t k = 0; k < s.length; ++k) {
        const T e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.length; ++k) out[base + k * s.inner] /= total;
    }
  }
  return make_result<T>(a.shape(), std::move(out), "softmax", {&a}, [s](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.length * s.inner + i;
        T dot = T(0);
        for (std::size_t k = 0; k < s.length; ++k) dot += g[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.length; ++k) {
          const std::size_t j = base + k * s.inner;
          gx[j] += y[j] * (g[j] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis) {
  require_axis(a.shape(), axis, "log_softmax");
  const AxisSplit s = split_axis(a.shape(), axis);
  const auto& x = a.node().data;
  std::vector<T> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.length; ++k) {
        const T v = x[base + k * s.inner];
        if (!std::isfinite(v)) throw NumericError("log_softmax: non-finite input");
        mx = std::max(mx, v);
      }
      T total = T(0);
      for (std::size_t k = 0; k < s.length; ++k) total += std::exp(x[base + k * s.inner] - mx);
      const T lse = mx + std::log(total);
      for (std::size_t k = 0; k < s.length; ++k) out[base + k * s.inner] = x[base + k * s.inner] - lse;
    }
  }
  return make_result<T>(a.shape(), std::move(out), "log_softmax", {&a}, [s](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.length * s.inner + i;
        T total = T(0);
        for (std::size_t k = 0; k < s.length; ++k) total += g[base + k * s.inner];
        for (std::size_t k = 0; k < s.length; ++k) {
          const std::size_t j = base + k * s.inner;
          gx[j] += g[j] - std::exp(y[j]) * total;
        }
      }
    }
  });
}

// --- shape ----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return make_result<T>(std::move(shape), a.node().data, "reshape", {&a}, [](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::size_t axis0, std::size_t axis1) {
  require_axis(a.shape(), axis0, "transpose");
  require_axis(a.shape(), axis1, "transpose");
  Shape out_shape = a.shape();
  std::swap(out_shape[axis0], out_shape[axis1]);
  // Input strides permuted into output order.
  Shape in_strides = row_major_strides(a.shape());
  std::swap(in_strides[axis0], in_strides[axis1]);
  BroadcastPlan plan;
  plan.out = out_shape;
  plan.a_strides = in_strides;
  plan.b_strides.assign(out_shape.size(), 0);
  std::vector<T> out(a.numel());
  const auto& x = a.node().data;
  for_each_broadcast(plan, [&](std::size_t io, std::size_t ia, std::size_t) { out[io] = x[ia]; });
  return make_result<T>(std::move(out_shape), std::move(out), "transpose", {&a}, [plan](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for_each_broadcast(plan, [&](std::size_t io, std::size_t ia, std::size_t) { gx[ia] += self.grad[io]; });
  });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  const Shape& first = parts[0].shape();
  require_axis(first, axis, "concat");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const AxisSplit os = split_axis(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    const auto& x = p.node().data;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(x.data() + o * len * os.inner, len * os.inner,
                  out.data() + (o * os.length + offset) * os.inner);
    }
    offsets.push_back(offset);
    offset += len;
  }
  std::vector<std::size_t> lengths;
  for (const auto& p : parts) lengths.push_back(p.dim(axis));
  return record_op<T>(std::move(out_shape), std::move(out), "concat",
                      std::vector<Tensor<T>>(parts.begin(), parts.end()),
                      [os, offsets, lengths](TensorNode<T>& self) {
                        for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                          T* gx = input_grad(self, i);
                          if (!gx) continue;
                          const std::size_t len = lengths[i];
                          for (std::size_t o = 0; o < os.outer; ++o) {
                            const T* src = self.grad.data() + (o * os.length + offsets[i]) * os.inner;
                            T* dst = gx + o * len * os.inner;
                            for (std::size_t j = 0; j < len * os.inner; ++j) dst[j] += src[j];
                          }
                        }
                      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis(a.shape(), axis, "slice");
  if (begin >= end || end > a.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of size " + std::to_string(a.dim(axis)));
  }
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::size_t len = end - begin;
  std::vector<T> out(s.outer * len * s.inner);
  const auto& x = a.node().data;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.length + begin) * s.inner, len * s.inner, out.data() + o * len * s.inner);
  }
  Shape shape = a.shape();
  shape[axis] = len;
  return make_result<T>(std::move(shape), std::move(out), "slice", {&a}, [s, begin, len](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      T* dst = gx + (o * s.length + begin) * s.inner;
      const T* src = self.grad.data() + o * len * s.inner;
      for (std::size_t j = 0; j < len * s.inner; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> ids) {
  require_rank(table.shape(), 2, "embedding", "table");
  if (ids.empty()) throw UsageError("embedding: no ids");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  std::vector<T> out(idv.size() * d);
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] >= rows) {
      throw DimensionError("embedding: id " + std::to_string(idv[i]) + " out of range for table " +
                           shape_str(table.shape()));
    }
    std::copy_n(table.node().data.data() + idv[i] * d, d, out.data() + i * d);
  }
  const std::size_t count = idv.size();
  return make_result<T>({count, d}, std::move(out), "embedding", {&table},
                        [idv = std::move(idv), d](TensorNode<T>& self) {
                          T* gt = input_grad(self, 0);
                          if (!gt) return;
                          for (std::size_t i = 0; i < idv.size(); ++i) {
                            for (std::size_t j = 0; j < d; ++j) gt[idv[i] * d + j] += self.grad[i * d + j];
                          }
                        });
}

template <typename T>
Tensor<T> tile_spatial(const Tensor<T>& q, std::size_t height, std::size_t width) {
  if (q.rank() != 1 && q.rank() != 2) {
    throw DimensionError("tile_spatial: expected [m] or [N x m], got " + shape_str(q.shape()));
  }
  if (height == 0 || width == 0) throw ConfigError("tile_spatial: grid must be non-empty");
  const std::size_t hw = height * width;
  const std::size_t vectors = q.numel();
  std::vector<T> out(vectors * hw);
  const auto& x = q.node().data;
  for (std::size_t v = 0; v < vectors; ++v) std::fill_n(out.data() + v * hw, hw, x[v]);
  Shape shape = q.shape();
  shape.push_back(height);
  shape.push_back(width);
  return make_result<T>(std::move(shape), std::move(out), "tile_spatial", {&q}, [vectors, hw](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t v = 0; v < vectors; ++v) {
      T acc = T(0);
      for (std::size_t j = 0; j < hw; ++j) acc += self.grad[v * hw + j];
      gx[v] += acc;
    }
  });
}

template <typename T>
Tensor<T> hat_encode(const Tensor<T>& counts, std::size_t max_count) {
  if (counts.rank() != 1) throw DimensionError("hat_encode: expected [N], got " + shape_str(counts.shape()));
  const std::size_t n = counts.numel(), k = max_count + 1;
  const T top = static_cast<T>(max_count);
  std::vector<T> out(n * k);
  const auto& x = counts.node().data;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] >= T(0))) throw NumericError("hat_encode: count must be non-negative and finite");
    const T c = std::min(x[i], top);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = std::max(T(0), T(1) - std::abs(c - static_cast<T>(j)));
  }
  return make_result<T>({n, k}, std::move(out), "hat_encode", {&counts}, [n, k, top](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& x = input_data(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > top) continue;
      for (std::size_t j = 0; j < k; ++j) {
        const T d = x[i] - static_cast<T>(j);
        if (std::abs(d) < T(1) && d != T(0)) gx[i] += self.grad[i * k + j] * (d > T(0) ? T(-1) : T(1));
      }
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets, T smoothing) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be [K] or [N x K], got " + shape_str(logits.shape()));
  }
  const std::size_t n = logits.rank() == 2 ? logits.dim(0) : 1;
  const std::size_t k = logits.shape().back();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                         " rows");
  }
  if (!(smoothing >= T(0) && smoothing < T(1))) throw ConfigError("cross_entropy: smoothing must be in [0, 1)");
  if (smoothing > T(0) && k < 2) throw ConfigError("cross_entropy: smoothing needs at least 2 classes");
  for (auto t : targets) {
    if (t >= k) throw UsageError("cross_entropy: target " + std::to_string(t) + " >= " + std::to_string(k) + " classes");
  }
  const T on = T(1) - smoothing;
  const T off = k > 1 ? smoothing / static_cast<T>(k - 1) : T(0);
  const auto& z = logits.node().data;
  std::vector<T> probs(n * k);
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = z.data() + i * k;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(row[j])) throw NumericError("cross_entropy: non-finite logit");
      mx = std::max(mx, row[j]);
    }
    T total = T(0);
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) {
      const T logp = row[j] - lse;
      probs[i * k + j] = std::exp(logp);
      const T weight = j == targets[i] ? on : off;
      if (weight != T(0)) loss -= weight * logp;
    }
  }
  loss /= static_cast<T>(n);
  std::vector<std::size_t> tv(targets.begin(), targets.end());
  return make_result<T>({1}, {loss}, "cross_entropy", {&logits},
                        [probs = std::move(probs), tv = std::move(tv), n, k, on, off](TensorNode<T>& self) {
                          T* gz = input_grad(self, 0);
                          if (!gz) return;
                          const T g = self.grad[0] / static_cast<T>(n);
                          for (std::size_t i = 0; i < n; ++i) {
                            for (std::size_t j = 0; j < k; ++j) {
                              const T target = j == tv[i] ? on : off;
                              gz[i * k + j] += g * (probs[i * k + j] - target);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> row_norm(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "row_norm", "input");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const auto& x = a.node().data;
  std::vector<T> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::size_t c = 0; c < cols; ++c) acc += x[r * cols + c] * x[r * cols + c];
    out[r] = std::sqrt(acc);
  }
  return make_result<T>({rows, 1}, std::move(out), "row_norm", {&a}, [rows, cols](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& x = input_data(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const T n = self.data[r];
      if (n == T(0)) continue;
      const T g = self.grad[r] / n;
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g * x[r * cols + c];
    }
  });
}

#define VQA_INSTANTIATE_OPS(T)                                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                            std::size_t);                                                         \
  template Tensor<T> avg_pool2d(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> neg(const Tensor<T>&);                                                       \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> exp(const Tensor<T>&);                                                       \
  template Tensor<T> log(const Tensor<T>&);                                                       \
  template Tensor<T> sqrt(const Tensor<T>&);                                                      \
  template Tensor<T> elementwise(Elementwise, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> sum(const Tensor<T>&, std::size_t, bool);                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&, std::size_t, bool);                                   \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                             \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);              \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::size_t>);                   \
  template Tensor<T> tile_spatial(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> hat_encode(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>, T);            \
  template Tensor<T> row_norm(const Tensor<T>&);

VQA_INSTANTIATE_OPS(float)
VQA_INSTANTIATE_OPS(double)

}  // namespace vqa
