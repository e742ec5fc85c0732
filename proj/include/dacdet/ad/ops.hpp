#pragma once

#include <cstdint>
#include <vector>

#include "dacdet/ad/tensor.hpp"

// Differentiable primitives. Shapes must agree exactly except where noted:
// the only broadcasts are the per-channel/per-row bias in conv2d and linear,
// and scalar constants in scale/add_scalar.
namespace dacdet::ad {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T offset);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
/// x * sigmoid(x)
template <typename T> Tensor<T> silu(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
/// Throws DomainError if any element is <= 0.
template <typename T> Tensor<T> log(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> logsumexp(const Tensor<T>& x);

/// Concatenates along dim 0; remaining dims must match.
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts);
/// Flat-index gather into a rank-1 result.
template <typename T> Tensor<T> gather(const Tensor<T>& x, const std::vector<int64_t>& flat_indices);

/// Elementwise binary cross-entropy in logit form:
/// max(x, 0) - x * t + log(1 + exp(-|x|)). Targets carry no gradient.
template <typename T> Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<T>& targets);

/// Cross-correlation of a C_in x H x W input with a C_out x C_in x k x k kernel.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int pad);
/// As above plus a per-output-channel bias of shape [C_out].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                 int pad);

/// weight [d_out x d_in] * input [d_in] + bias [d_out]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

/// C x H x W -> C, per-channel spatial mean.
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

/// a . b / (|a| |b|) for rank-1 inputs; throws ZeroNormError on a zero vector.
template <typename T> Tensor<T> cosine_sim(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace dacdet::ad
