#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lae/pooling.hpp"
#include "lae/tensor.hpp"

namespace lae {

/// Gradients of a pooled output with respect to the pooled input and to
/// each trainable pooling parameter. d_log_t has one entry per
/// trainable temperature entry (empty for non-LAE or fixed mode);
/// d_pre_alpha one per channel (mixed); d_gate_w one per window site
/// (gated).
struct PoolGradients {
    Tensor d_input;
    std::vector<double> d_log_t;
    std::vector<double> d_pre_alpha;
    std::vector<double> d_gate_w;
};

// --- per-window backward operators ------------------------------------------

/// dLAE/dz_i = softargmax(z/t): positive entries summing to 1.
std::vector<double> lae_backward_input(std::span<const double> z, double t);

/// dLAE/dlog t = LAE(z;t) - sum z_i softargmax(z/t)_i (the chain rule
/// through t = exp(log t) of the paper-form temperature derivative).
double lae_backward_logt(std::span<const double> z, double t);

/// One-hot at the first index attaining the maximum.
std::vector<double> max_backward(std::span<const double> z);

/// Uniform [1/n, ..., 1/n].
std::vector<double> avg_backward(std::span<const double> z);

/// dLSE/dz_i = softargmax(z).
std::vector<double> lse_backward_input(std::span<const double> z);

struct MixedBackward {
    std::vector<double> d_input;
    double d_pre_alpha = 0.0; // (max - avg) * alpha * (1 - alpha)
};
MixedBackward mixed_backward(std::span<const double> z, double alpha);

struct GatedBackward {
    std::vector<double> d_input;
    std::vector<double> d_gate_w;
};
GatedBackward gated_backward(std::span<const double> z, std::span<const double> w);

/// softargmax(logits) - onehot(target): the gradient of
/// -log softargmax(logits)_target.
std::vector<double> softargmax_xent_backward(std::span<const double> logits, std::size_t target);

// --- independent verification oracle ----------------------------------------

/// Central differences (f(z + h e_i) - f(z - h e_i)) / 2h per
/// coordinate, double precision. Independent of every analytic path
/// above. Throws for h <= 0.
std::vector<double> finite_diff_oracle(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> z, double h);

/// Scalar central difference (f(x+h) - f(x-h)) / 2h.
double finite_diff_scalar(const std::function<double(double)>& f, double x, double h);

/// Central differences with a per-coordinate step h0 * (|z_i| + 1),
/// the step rule used by the gradient agreement suite.
std::vector<double> finite_diff_oracle_scaled(
    const std::function<double(std::span<const double>)>& f, std::span<const double> z,
    double h0);

// --- whole-tensor backward ----------------------------------------------------

/// Backward pass of global_pool: upstream has shape (batch, channels,
/// 1, 1); d_input matches x. Parameter gradients are accumulated over
/// windows in canonical order, so the parallel version is bitwise
/// identical to the serial one.
PoolGradients global_pool_backward(const Tensor& x, const PoolSpec& spec, const Tensor& upstream);

/// Serial reference implementation kept for testing and benchmarking.
PoolGradients global_pool_backward_serial(const Tensor& x, const PoolSpec& spec,
                                          const Tensor& upstream);

} // namespace lae
