#include "lae/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "lae/precision.hpp"

namespace lae {

double sigmoid(double x) {
    // Evaluate through exp of a non-positive argument so neither branch
    // can overflow.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// --- parameter blocks -------------------------------------------------------

TemperatureParam::TemperatureParam(TemperatureMode mode, std::vector<double> log_t)
    : mode_(mode), log_t_(std::move(log_t)) {}

TemperatureParam TemperatureParam::fixed(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("TemperatureParam: t must be positive");
    return TemperatureParam(TemperatureMode::fixed, {std::log(t)});
}

TemperatureParam TemperatureParam::shared(double t0) {
    if (!(t0 > 0.0)) throw std::invalid_argument("TemperatureParam: t0 must be positive");
    return TemperatureParam(TemperatureMode::shared, {std::log(t0)});
}

TemperatureParam TemperatureParam::per_channel(double t0, std::size_t channels) {
    if (!(t0 > 0.0)) throw std::invalid_argument("TemperatureParam: t0 must be positive");
    if (channels == 0) throw std::invalid_argument("TemperatureParam: channels must be >= 1");
    return TemperatureParam(TemperatureMode::per_channel,
                            std::vector<double>(channels, std::log(t0)));
}

double TemperatureParam::temperature(std::size_t channel) const {
    if (mode_ == TemperatureMode::per_channel) {
        return std::exp(log_t_.at(channel));
    }
    return std::exp(log_t_[0]);
}

std::size_t TemperatureParam::trainable_size() const {
    return mode_ == TemperatureMode::fixed ? 0 : log_t_.size();
}

PoolSpec PoolSpec::max_pool() {
    PoolSpec s;
    s.kind = PoolKind::max;
    return s;
}

PoolSpec PoolSpec::avg_pool() {
    PoolSpec s;
    s.kind = PoolKind::avg;
    return s;
}

PoolSpec PoolSpec::lse_pool() {
    PoolSpec s;
    s.kind = PoolKind::lse;
    return s;
}

PoolSpec PoolSpec::lae_pool(TemperatureParam temperature) {
    PoolSpec s;
    s.kind = PoolKind::lae;
    s.temperature = std::move(temperature);
    return s;
}

PoolSpec PoolSpec::mixed_pool(MixedParam mixed) {
    if (mixed.pre_alpha.empty()) {
        throw std::invalid_argument("PoolSpec: mixed pooling needs one pre_alpha per channel");
    }
    PoolSpec s;
    s.kind = PoolKind::mixed;
    s.mixed = std::move(mixed);
    return s;
}

PoolSpec PoolSpec::gated_pool(GateParam gate) {
    if (gate.w.empty()) {
        throw std::invalid_argument("PoolSpec: gated pooling needs a nonempty gate vector");
    }
    PoolSpec s;
    s.kind = PoolKind::gated;
    s.gate = std::move(gate);
    return s;
}

// --- per-window operators ---------------------------------------------------

double pool_max(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("pool_max: empty window");
    return *std::max_element(z.begin(), z.end());
}

double pool_avg(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("pool_avg: empty window");
    const double sum = std::accumulate(z.begin(), z.end(), 0.0);
    return sum / static_cast<double>(z.size());
}

double pool_lse(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("pool_lse: empty window");
    const ShiftedLogSum s = stable_shifted_log_sum(z, 1.0);
    return s.max_value + s.log_sum;
}

double pool_lae(std::span<const double> z, double t) {
    if (z.empty()) throw std::invalid_argument("pool_lae: empty window");
    if (!(t > 0.0)) throw std::invalid_argument("pool_lae: temperature must be positive");
    const ShiftedLogSum s = stable_shifted_log_sum(z, t);
    // For a constant window log_sum == log(n) exactly, so the result is
    // bit-exactly the shared value.
    return s.max_value + t * (s.log_sum - std::log(static_cast<double>(z.size())));
}

double pool_mixed(std::span<const double> z, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("pool_mixed: alpha must lie in [0,1]");
    }
    return alpha * pool_max(z) + (1.0 - alpha) * pool_avg(z);
}

double pool_gated(std::span<const double> z, std::span<const double> w) {
    if (w.size() != z.size()) {
        throw std::invalid_argument("pool_gated: gate length must match the window");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) dot += w[i] * z[i];
    return pool_mixed(z, sigmoid(dot));
}

std::vector<double> softargmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softargmax: empty input");
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> group_logits(std::span<const double> z,
                                 const std::vector<std::vector<std::size_t>>& groups) {
    if (z.empty()) throw std::invalid_argument("group_logits: empty input");
    std::vector<char> seen(z.size(), 0);
    std::size_t covered = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("group_logits: empty group");
        for (std::size_t idx : g) {
            if (idx >= z.size()) throw std::invalid_argument("group_logits: index out of range");
            if (seen[idx]) throw std::invalid_argument("group_logits: index appears twice");
            seen[idx] = 1;
            ++covered;
        }
    }
    if (covered != z.size()) {
        throw std::invalid_argument("group_logits: groups do not cover every index");
    }

    std::vector<double> coarse(groups.size());
    std::vector<double> members;
    for (std::size_t j = 0; j < groups.size(); ++j) {
        members.clear();
        for (std::size_t idx : groups[j]) members.push_back(z[idx]);
        coarse[j] = pool_lse(members);
    }
    return coarse;
}

// --- whole-tensor global pooling --------------------------------------------

namespace detail {

void validate_global_pool(const Tensor& x, const PoolSpec& spec) {
    const Shape& s = x.shape();
    switch (spec.kind) {
        case PoolKind::lae:
            if (spec.temperature.mode() == TemperatureMode::per_channel &&
                spec.temperature.size() != s.channels) {
                throw std::invalid_argument(
                    "global_pool: per-channel temperature count does not match channels");
            }
            break;
        case PoolKind::mixed:
            if (spec.mixed.pre_alpha.size() != s.channels) {
                throw std::invalid_argument(
                    "global_pool: mixed pre_alpha count does not match channels");
            }
            break;
        case PoolKind::gated:
            // The gate length pins the spatial size; a mismatch on
            // variable-size input is an error, not a silent truncation.
            if (spec.gate.w.size() != s.window()) {
                throw std::invalid_argument(
                    "global_pool: gate length does not match the pooling window");
            }
            break;
        default:
            break;
    }
}

} // namespace detail

namespace {

double pool_window(std::span<const double> window, std::size_t channel, const PoolSpec& spec) {
    switch (spec.kind) {
        case PoolKind::max: return pool_max(window);
        case PoolKind::avg: return pool_avg(window);
        case PoolKind::lse: return pool_lse(window);
        case PoolKind::lae: return pool_lae(window, spec.temperature.temperature(channel));
        case PoolKind::mixed: return pool_mixed(window, spec.mixed.alpha(channel));
        case PoolKind::gated: return pool_gated(window, spec.gate.w);
    }
    throw std::invalid_argument("global_pool: unknown pool kind");
}

} // namespace

Tensor global_pool_serial(const Tensor& x, const PoolSpec& spec) {
    detail::validate_global_pool(x, spec);
    const Shape& s = x.shape();
    std::vector<double> out(s.batch * s.channels);
    const std::span<const double> data = x.data();
    const std::size_t win = s.window();
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t c = 0; c < s.channels; ++c) {
            const std::size_t start = x.index(b, c, 0, 0);
            out[b * s.channels + c] = pool_window(data.subspan(start, win), c, spec);
        }
    }
    return Tensor({s.batch, s.channels, 1, 1}, std::move(out), x.precision());
}

Tensor global_pool(const Tensor& x, const PoolSpec& spec) {
    detail::validate_global_pool(x, spec);
    const Shape& s = x.shape();
    std::vector<double> out(s.batch * s.channels);
    const std::span<const double> data = x.data();
    const std::size_t win = s.window();
    const std::int64_t total = static_cast<std::int64_t>(s.batch * s.channels);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) {
        const std::size_t b = static_cast<std::size_t>(i) / s.channels;
        const std::size_t c = static_cast<std::size_t>(i) % s.channels;
        const std::size_t start = x.index(b, c, 0, 0);
        out[static_cast<std::size_t>(i)] = pool_window(data.subspan(start, win), c, spec);
    }
    return Tensor({s.batch, s.channels, 1, 1}, std::move(out), x.precision());
}

} // namespace lae
