#include "dacdet/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "dacdet/ad/errors.hpp"

namespace dacdet::ad {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const MatRM<T>>;
template <typename T>
using MutMap = Eigen::Map<MatRM<T>>;

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

// Builds an output node; records parents only when a gradient can flow.
template <typename T>
Tensor<T> make_output(const char* op, const Shape& shape, std::vector<T> data,
                      std::vector<const Tensor<T>*> inputs, BackwardFn<T> backward_fn) {
  auto out = Tensor<T>::from(shape, std::move(data));
  Node<T>* node = out.node();
  node->op = op;
  bool needs = grad_enabled() &&
               std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    for (const Tensor<T>* t : inputs) node->parents.push_back(t->node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return out;
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& x, std::size_t rank, const char* what) {
  if (x.shape().rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + x.shape().to_string());
  }
}

// y = f(x); dx += g * df(x, y)
template <typename T, typename F, typename DF>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, DF df) {
  auto xs = x.data();
  std::vector<T> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) y[i] = f(xs[i]);
  return make_output<T>(op, x.shape(), std::move(y), {&x}, [df](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i] * df(px.data[i], n.data[i]);
  });
}

// y = f(a, b); da += g * dfa(a, b, y); db += g * dfb(a, b, y)
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, DA dfa, DB dfb) {
  require_same_shape(op, a, b);
  auto as = a.data();
  auto bs = b.data();
  std::vector<T> y(as.size());
  for (std::size_t i = 0; i < as.size(); ++i) y[i] = f(as[i], bs[i]);
  return make_output<T>(op, a.shape(), std::move(y), {&a, &b}, [dfa, dfb](Node<T>& n) {
    Node<T>& pa = *n.parents[0];
    Node<T>& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += n.grad[i] * dfa(pa.data[i], pb.data[i], n.data[i]);
      if (pb.requires_grad) pb.grad[i] += n.grad[i] * dfb(pa.data[i], pb.data[i], n.data[i]);
    }
  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void im2col(const T* in, int channels, int height, int width, int k, int stride, int pad, int out_h,
            int out_w, T* col) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = in + (static_cast<std::size_t>(c) * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int height, int width, int k, int stride, int pad, int out_h,
            int out_w, T* in_grad) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          T* dst = in_grad + (static_cast<std::size_t>(c) * height + iy) * width;
          const T* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_impl(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>* bias, int stride,
                      int pad) {
  require_rank("conv2d", input, 3, "input");
  require_rank("conv2d", kernel, 4, "kernel");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  const int channels = static_cast<int>(is[0]);
  const int height = static_cast<int>(is[1]);
  const int width = static_cast<int>(is[2]);
  const int out_c = static_cast<int>(ks[0]);
  const int k = static_cast<int>(ks[2]);
  if (ks[1] != is[0] || ks[2] != ks[3] || k % 2 == 0) {
    throw ShapeError("conv2d: kernel " + ks.to_string() + " incompatible with input " + is.to_string() +
                     " (need C_out x C_in x k x k with odd k)");
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  const int span_h = height + 2 * pad - k;
  const int span_w = width + 2 * pad - k;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel " + ks.to_string() + " larger than padded input " + is.to_string());
  }
  const int out_h = span_h / stride + 1;
  const int out_w = span_w / stride + 1;
  if (bias) {
    require_rank("conv2d", *bias, 1, "bias");
    if (bias->shape()[0] != out_c) {
      throw ShapeError("conv2d: bias " + bias->shape().to_string() + " does not match kernel " +
                       ks.to_string());
    }
  }

  const int rows = channels * k * k;
  const int plane = out_h * out_w;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);
  auto cols = std::make_shared<std::vector<T>>();
  const T* col_ptr = input.data().data();
  if (!pointwise) {
    cols->resize(static_cast<std::size_t>(rows) * plane);
    im2col(input.data().data(), channels, height, width, k, stride, pad, out_h, out_w, cols->data());
    col_ptr = cols->data();
  }

  std::vector<T> out(static_cast<std::size_t>(out_c) * plane);
  MutMap<T> out_m(out.data(), out_c, plane);
  ConstMap<T> ker_m(kernel.data().data(), out_c, rows);
  ConstMap<T> col_m(col_ptr, rows, plane);
  out_m.noalias() = ker_m * col_m;
  if (bias) {
    auto bs = bias->data();
    for (int o = 0; o < out_c; ++o) out_m.row(o).array() += bs[o];
  }

  std::vector<const Tensor<T>*> inputs{&input, &kernel};
  if (bias) inputs.push_back(bias);
  Shape out_shape{out_c, out_h, out_w};
  return make_output<T>(
      "conv2d", out_shape, std::move(out), inputs,
      [=](Node<T>& n) {
        Node<T>& px = *n.parents[0];
        Node<T>& pk = *n.parents[1];
        ConstMap<T> dout(n.grad.data(), out_c, plane);
        const T* cp = pointwise ? px.data.data() : cols->data();
        ConstMap<T> col(cp, rows, plane);
        if (pk.requires_grad) {
          MutMap<T> dk(pk.grad.data(), out_c, rows);
          const double factor = testing::weight_grad_factor("conv2d");
          if (factor == 1.0) {
            dk.noalias() += dout * col.transpose();
          } else {
            dk.noalias() += (dout * col.transpose()) * static_cast<T>(factor);
          }
        }
        if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
          Node<T>& pb = *n.parents[2];
          // Plain loop: Eigen reductions peel by pointer alignment, which would
          // make the summation order (and the last bits) allocation-dependent.
          for (int o = 0; o < out_c; ++o) {
            T acc = 0;
            const T* row = n.grad.data() + static_cast<std::size_t>(o) * plane;
            for (int q = 0; q < plane; ++q) acc += row[q];
            pb.grad[o] += acc;
          }
        }
        if (px.requires_grad) {
          ConstMap<T> ker(pk.data.data(), out_c, rows);
          if (pointwise) {
            MutMap<T> dx(px.grad.data(), rows, plane);
            dx.noalias() += ker.transpose() * dout;
          } else {
            std::vector<T> dcol(static_cast<std::size_t>(rows) * plane);
            MutMap<T> dcol_m(dcol.data(), rows, plane);
            dcol_m.noalias() = ker.transpose() * dout;
            col2im(dcol.data(), channels, height, width, k, stride, pad, out_h, out_w, px.grad.data());
          }
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T out) { return -out / y; });
}

template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "minimum", a, b, [](T x, T y) { return x <= y ? x : y; }, [](T x, T y, T) { return x <= y ? T(1) : T(0); },
      [](T x, T y, T) { return x <= y ? T(0) : T(1); });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "maximum", a, b, [](T x, T y) { return x >= y ? x : y; }, [](T x, T y, T) { return x >= y ? T(1) : T(0); },
      [](T x, T y, T) { return x >= y ? T(0) : T(1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(
      "scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary(
      "add_scalar", a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      "sigmoid", x, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  return unary(
      "silu", x, [](T v) { return v * stable_sigmoid(v); },
      [](T v, T) {
        T s = stable_sigmoid(v);
        return s + v * s * (T(1) - s);
      });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (!(v > T(0))) throw DomainError("log: input must be strictly positive, got " + std::to_string(v));
  }
  return unary(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  return make_output<T>("sum", Shape{1}, {s}, {&x}, [](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (T& g : px.grad) g += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  return make_output<T>("mean", Shape{1}, {s * inv}, {&x}, [inv](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (T& g : px.grad) g += n.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> logsumexp(const Tensor<T>& x) {
  auto xs = x.data();
  T m = *std::max_element(xs.begin(), xs.end());
  T acc = T(0);
  for (T v : xs) acc += std::exp(v - m);
  T y = m + std::log(acc);
  return make_output<T>("logsumexp", Shape{1}, {y}, {&x}, [](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (std::size_t i = 0; i < px.data.size(); ++i) px.grad[i] += n.grad[0] * std::exp(px.data[i] - n.data[0]);
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto& first = parts.front().shape();
  int64_t rows = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.rank() == first.rank();
    for (std::size_t d = 1; ok && d < s.rank(); ++d) ok = s[d] == first[d];
    if (!ok) throw ShapeError("concat: shape mismatch " + first.to_string() + " vs " + s.to_string());
    rows += s[0];
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  std::vector<int64_t> dims = first.dims();
  dims[0] = rows;
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return make_output<T>("concat", Shape(dims), std::move(data), inputs, [](Node<T>& n) {
    std::size_t offset = 0;
    for (auto& parent : n.parents) {
      const std::size_t len = parent->data.size();
      if (parent->requires_grad) {
        for (std::size_t i = 0; i < len; ++i) parent->grad[i] += n.grad[offset + i];
      }
      offset += len;
    }
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<int64_t>& flat_indices) {
  if (flat_indices.empty()) throw ShapeError("gather: empty index list");
  auto xs = x.data();
  std::vector<T> y(flat_indices.size());
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    int64_t idx = flat_indices[i];
    if (idx < 0 || idx >= x.numel()) {
      throw ShapeError("gather: index " + std::to_string(idx) + " out of range for " + x.shape().to_string());
    }
    y[i] = xs[static_cast<std::size_t>(idx)];
  }
  Shape out_shape{static_cast<int64_t>(flat_indices.size())};
  return make_output<T>("gather", out_shape, std::move(y), {&x}, [flat_indices](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
      px.grad[static_cast<std::size_t>(flat_indices[i])] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<T>& targets) {
  if (static_cast<int64_t>(targets.size()) != logits.numel()) {
    throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) + " targets for logits " +
                     logits.shape().to_string());
  }
  auto xs = logits.data();
  std::vector<T> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const T x = xs[i];
    y[i] = std::max(x, T(0)) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return make_output<T>("bce_with_logits", logits.shape(), std::move(y), {&logits}, [targets](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      px.grad[i] += n.grad[i] * (stable_sigmoid(px.data[i]) - targets[i]);
    }
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int pad) {
  return conv2d_impl<T>(input, kernel, nullptr, stride, pad);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride, int pad) {
  return conv2d_impl<T>(input, kernel, &bias, stride, pad);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear", input, 1, "input");
  require_rank("linear", weight, 2, "weight");
  require_rank("linear", bias, 1, "bias");
  const int64_t d_out = weight.shape()[0];
  const int64_t d_in = weight.shape()[1];
  if (input.shape()[0] != d_in || bias.shape()[0] != d_out) {
    throw ShapeError("linear: weight " + weight.shape().to_string() + " incompatible with input " +
                     input.shape().to_string() + " and bias " + bias.shape().to_string());
  }
  // Fixed-order loops rather than Eigen GEMV: vectorized matrix-vector kernels
  // choose their summation order from pointer alignment, which breaks
  // bit-reproducibility between otherwise identical runs.
  const T* w = weight.data().data();
  const T* x = input.data().data();
  const T* b = bias.data().data();
  std::vector<T> y(static_cast<std::size_t>(d_out));
  for (int64_t o = 0; o < d_out; ++o) {
    T acc = 0;
    const T* row = w + o * d_in;
    for (int64_t i = 0; i < d_in; ++i) acc += row[i] * x[i];
    y[static_cast<std::size_t>(o)] = acc + b[o];
  }
  return make_output<T>("linear", Shape{d_out}, std::move(y), {&input, &weight, &bias}, [d_in, d_out](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    Node<T>& pw = *n.parents[1];
    Node<T>& pb = *n.parents[2];
    const T* g = n.grad.data();
    if (pw.requires_grad) {
      const T factor = static_cast<T>(testing::weight_grad_factor("linear"));
      const T* xv = px.data.data();
      for (int64_t o = 0; o < d_out; ++o) {
        T* dw = pw.grad.data() + o * d_in;
        for (int64_t i = 0; i < d_in; ++i) dw[i] += g[o] * xv[i] * factor;
      }
    }
    if (pb.requires_grad) {
      for (int64_t o = 0; o < d_out; ++o) pb.grad[static_cast<std::size_t>(o)] += g[o];
    }
    if (px.requires_grad) {
      const T* wv = pw.data.data();
      for (int64_t i = 0; i < d_in; ++i) {
        T acc = 0;
        for (int64_t o = 0; o < d_out; ++o) acc += wv[o * d_in + i] * g[o];
        px.grad[static_cast<std::size_t>(i)] += acc;
      }
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank("global_avg_pool", x, 3, "input");
  const int64_t channels = x.shape()[0];
  const int64_t plane = x.shape()[1] * x.shape()[2];
  const T inv = T(1) / static_cast<T>(plane);
  auto xs = x.data();
  std::vector<T> y(static_cast<std::size_t>(channels));
  for (int64_t c = 0; c < channels; ++c) {
    T s = T(0);
    for (int64_t i = 0; i < plane; ++i) s += xs[static_cast<std::size_t>(c * plane + i)];
    y[static_cast<std::size_t>(c)] = s * inv;
  }
  return make_output<T>("global_avg_pool", Shape{channels}, std::move(y), {&x}, [channels, plane, inv](Node<T>& n) {
    Node<T>& px = *n.parents[0];
    for (int64_t c = 0; c < channels; ++c) {
      const T g = n.grad[static_cast<std::size_t>(c)] * inv;
      for (int64_t i = 0; i < plane; ++i) px.grad[static_cast<std::size_t>(c * plane + i)] += g;
    }
  });
}

template <typename T>
Tensor<T> cosine_sim(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("cosine_sim", a, 1, "a");
  require_same_shape("cosine_sim", a, b);
  auto as = a.data();
  auto bs = b.data();
  T dot = T(0), na2 = T(0), nb2 = T(0);
  for (std::size_t i = 0; i < as.size(); ++i) {
    dot += as[i] * bs[i];
    na2 += as[i] * as[i];
    nb2 += bs[i] * bs[i];
  }
  if (!(na2 > T(0)) || !(nb2 > T(0))) {
    throw ZeroNormError("cosine_sim: zero-norm embedding (|a|^2=" + std::to_string(na2) +
                        ", |b|^2=" + std::to_string(nb2) + ")");
  }
  const T na = std::sqrt(na2);
  const T nb = std::sqrt(nb2);
  const T y = dot / (na * nb);
  return make_output<T>("cosine_sim", Shape{1}, {y}, {&a, &b}, [na, nb, na2, nb2](Node<T>& n) {
    Node<T>& pa = *n.parents[0];
    Node<T>& pb = *n.parents[1];
    const T g = n.grad[0];
    const T y = n.data[0];
    const T inv = T(1) / (na * nb);
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += g * (pb.data[i] * inv - y * pa.data[i] / na2);
      if (pb.requires_grad) pb.grad[i] += g * (pa.data[i] * inv - y * pb.data[i] / nb2);
    }
  });
}

#define DACDET_INSTANTIATE_OPS(T)                                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                      \
  template Tensor<T> silu(const Tensor<T>&);                                                         \
  template Tensor<T> exp(const Tensor<T>&);                                                          \
  template Tensor<T> log(const Tensor<T>&);                                                          \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> mean(const Tensor<T>&);                                                         \
  template Tensor<T> logsumexp(const Tensor<T>&);                                                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                          \
  template Tensor<T> gather(const Tensor<T>&, const std::vector<int64_t>&);                          \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const std::vector<T>&);                       \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, int, int);                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);         \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                              \
  template Tensor<T> cosine_sim(const Tensor<T>&, const Tensor<T>&);

DACDET_INSTANTIATE_OPS(float)
DACDET_INSTANTIATE_OPS(double)

#undef DACDET_INSTANTIATE_OPS

}  // namespace dacdet::ad
