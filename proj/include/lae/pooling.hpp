#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lae/tensor.hpp"

namespace lae {

double sigmoid(double x);

enum class TemperatureMode { fixed, shared, per_channel };

/// Temperature stored as log(t): unbounded during training and
/// multiplicatively symmetric around t = 1. Fixed mode is never updated
/// by the trainer.
class TemperatureParam {
public:
    TemperatureParam() : TemperatureParam(TemperatureMode::fixed, {0.0}) {}

    static TemperatureParam fixed(double t);
    static TemperatureParam shared(double t0);
    static TemperatureParam per_channel(double t0, std::size_t channels);

    TemperatureMode mode() const { return mode_; }
    std::size_t size() const { return log_t_.size(); }
    std::span<const double> log_t() const { return log_t_; }

    /// t for a given channel: exp(log_t[c]) in per-channel mode,
    /// exp(log_t[0]) otherwise.
    double temperature(std::size_t channel) const;

    /// Number of trainable entries (0 for fixed mode).
    std::size_t trainable_size() const;

    void shift_log_t(std::size_t i, double delta) { log_t_[i] += delta; }

private:
    TemperatureParam(TemperatureMode mode, std::vector<double> log_t);
    TemperatureMode mode_;
    std::vector<double> log_t_;
};

/// Per-channel mixing pre-activation; alpha = sigmoid(pre_alpha) stays
/// in (0,1) without projection steps.
struct MixedParam {
    std::vector<double> pre_alpha;

    double alpha(std::size_t channel) const { return sigmoid(pre_alpha.at(channel)); }
};

/// Gate weights over the window contents; alpha = sigmoid(w . z).
/// The length pins the spatial size the operator can evaluate.
struct GateParam {
    std::vector<double> w;
};

enum class PoolKind { max, avg, lse, lae, mixed, gated };

/// Operator selection plus its parameter block; exactly the block
/// matching `kind` is populated (use the factories).
struct PoolSpec {
    PoolKind kind = PoolKind::avg;
    TemperatureParam temperature;   // lae only
    MixedParam mixed;               // mixed only
    GateParam gate;                 // gated only

    static PoolSpec max_pool();
    static PoolSpec avg_pool();
    static PoolSpec lse_pool();
    static PoolSpec lae_pool(TemperatureParam temperature);
    static PoolSpec mixed_pool(MixedParam mixed);
    static PoolSpec gated_pool(GateParam gate);
};

// --- per-window forward operators -----------------------------------------

double pool_max(std::span<const double> z);
double pool_avg(std::span<const double> z);
double pool_lse(std::span<const double> z);

/// t * (LSE(z/t) - log n), stable shifted kernel. n is always the
/// runtime window size. Throws for t <= 0 or an empty window.
double pool_lae(std::span<const double> z, double t);

/// alpha * max(z) + (1 - alpha) * avg(z), alpha in [0,1].
double pool_mixed(std::span<const double> z, double alpha);

/// pool_mixed with alpha = sigmoid(w . z); w must match z in length.
double pool_gated(std::span<const double> z, std::span<const double> w);

/// Shift-stable exp-normalization; entries sum to 1.
std::vector<double> softargmax(std::span<const double> z);

/// Coarse-grains logits: z'_j = LSE over the members of group j.
/// `groups` must partition {0..n-1} with no empty group.
std::vector<double> group_logits(std::span<const double> z,
                                 const std::vector<std::vector<std::size_t>>& groups);

// --- whole-tensor global pooling -------------------------------------------

/// Applies the chosen operator to every (batch, channel) window.
/// Output shape is (batch, channels, 1, 1). Windows are independent, so
/// the parallel version is bitwise identical to global_pool_serial.
Tensor global_pool(const Tensor& x, const PoolSpec& spec);

/// Serial reference implementation kept for testing and benchmarking.
Tensor global_pool_serial(const Tensor& x, const PoolSpec& spec);

namespace detail {
/// Shape/parameter consistency checks shared by global_pool and its
/// backward pass.
void validate_global_pool(const Tensor& x, const PoolSpec& spec);
} // namespace detail

} // namespace lae
