#include "lae/grad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace lae {

std::vector<double> lae_backward_input(std::span<const double> z, double t) {
    if (z.empty()) throw std::invalid_argument("lae_backward_input: empty window");
    if (!(t > 0.0)) throw std::invalid_argument("lae_backward_input: t must be positive");
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp((z[i] - m) / t);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double lae_backward_logt(std::span<const double> z, double t) {
    const std::vector<double> p = lae_backward_input(z, t);
    double weighted = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) weighted += z[i] * p[i];
    return pool_lae(z, t) - weighted;
}

std::vector<double> max_backward(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("max_backward: empty window");
    std::vector<double> g(z.size(), 0.0);
    // Ties route the full gradient to the first maximal index.
    const std::size_t arg = static_cast<std::size_t>(
        std::distance(z.begin(), std::max_element(z.begin(), z.end())));
    g[arg] = 1.0;
    return g;
}

std::vector<double> avg_backward(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("avg_backward: empty window");
    return std::vector<double>(z.size(), 1.0 / static_cast<double>(z.size()));
}

std::vector<double> lse_backward_input(std::span<const double> z) {
    return softargmax(z);
}

MixedBackward mixed_backward(std::span<const double> z, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("mixed_backward: alpha must lie in [0,1]");
    }
    MixedBackward out;
    out.d_input = max_backward(z);
    const std::vector<double> ag = avg_backward(z);
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.d_input[i] = alpha * out.d_input[i] + (1.0 - alpha) * ag[i];
    }
    out.d_pre_alpha = (pool_max(z) - pool_avg(z)) * alpha * (1.0 - alpha);
    return out;
}

GatedBackward gated_backward(std::span<const double> z, std::span<const double> w) {
    if (w.size() != z.size()) {
        throw std::invalid_argument("gated_backward: gate length must match the window");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) dot += w[i] * z[i];
    const double alpha = sigmoid(dot);
    const double spread = pool_max(z) - pool_avg(z);
    const double gate_slope = spread * alpha * (1.0 - alpha);

    GatedBackward out;
    out.d_input = max_backward(z);
    const std::vector<double> ag = avg_backward(z);
    out.d_gate_w.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.d_input[i] = alpha * out.d_input[i] + (1.0 - alpha) * ag[i] + gate_slope * w[i];
        out.d_gate_w[i] = gate_slope * z[i];
    }
    return out;
}

std::vector<double> softargmax_xent_backward(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw std::invalid_argument("softargmax_xent_backward: target out of range");
    }
    std::vector<double> g = softargmax(logits);
    g[target] -= 1.0;
    return g;
}

std::vector<double> finite_diff_oracle(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> z, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_oracle: h must be positive");
    std::vector<double> probe(z.begin(), z.end());
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double zi = probe[i];
        probe[i] = zi + h;
        const double fp = f(probe);
        probe[i] = zi - h;
        const double fm = f(probe);
        probe[i] = zi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double finite_diff_scalar(const std::function<double(double)>& f, double x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_scalar: h must be positive");
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

std::vector<double> finite_diff_oracle_scaled(
    const std::function<double(std::span<const double>)>& f, std::span<const double> z,
    double h0) {
    if (!(h0 > 0.0)) throw std::invalid_argument("finite_diff_oracle_scaled: h must be positive");
    std::vector<double> probe(z.begin(), z.end());
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double zi = probe[i];
        const double h = h0 * (std::fabs(zi) + 1.0);
        probe[i] = zi + h;
        const double fp = f(probe);
        probe[i] = zi - h;
        const double fm = f(probe);
        probe[i] = zi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// --- whole-tensor backward ----------------------------------------------------

namespace {

struct WindowGrads {
    std::vector<double> d_input; // scaled by the upstream value
    double d_param = 0.0;        // d_log_t (lae) or d_pre_alpha (mixed)
    std::vector<double> d_gate;  // gated only
};

WindowGrads window_backward(std::span<const double> window, std::size_t channel,
                            const PoolSpec& spec, double upstream) {
    WindowGrads out;
    switch (spec.kind) {
        case PoolKind::max:
            out.d_input = max_backward(window);
            break;
        case PoolKind::avg:
            out.d_input = avg_backward(window);
            break;
        case PoolKind::lse:
            out.d_input = lse_backward_input(window);
            break;
        case PoolKind::lae: {
            const double t = spec.temperature.temperature(channel);
            out.d_input = lae_backward_input(window, t);
            if (spec.temperature.mode() != TemperatureMode::fixed) {
                out.d_param = upstream * lae_backward_logt(window, t);
            }
            break;
        }
        case PoolKind::mixed: {
            MixedBackward mb = mixed_backward(window, spec.mixed.alpha(channel));
            out.d_input = std::move(mb.d_input);
            out.d_param = upstream * mb.d_pre_alpha;
            break;
        }
        case PoolKind::gated: {
            GatedBackward gb = gated_backward(window, spec.gate.w);
            out.d_input = std::move(gb.d_input);
            out.d_gate = std::move(gb.d_gate_w);
            for (double& v : out.d_gate) v *= upstream;
            break;
        }
    }
    for (double& v : out.d_input) v *= upstream;
    return out;
}

void validate_backward(const Tensor& x, const Tensor& upstream) {
    const Shape& s = x.shape();
    const Shape expect{s.batch, s.channels, 1, 1};
    if (!(upstream.shape() == expect)) {
        throw std::invalid_argument("global_pool_backward: upstream shape must be (B,C,1,1)");
    }
}

/// Folds per-window results into the output in canonical window order;
/// identical for the serial and parallel paths.
PoolGradients reduce_windows(const Tensor& x, const PoolSpec& spec,
                             std::vector<WindowGrads>& per_window) {
    const Shape& s = x.shape();
    const std::size_t win = s.window();

    std::vector<double> d_input(s.volume());
    std::vector<double> d_log_t, d_pre_alpha, d_gate_w;
    if (spec.kind == PoolKind::lae) {
        d_log_t.assign(spec.temperature.trainable_size(), 0.0);
    } else if (spec.kind == PoolKind::mixed) {
        d_pre_alpha.assign(s.channels, 0.0);
    } else if (spec.kind == PoolKind::gated) {
        d_gate_w.assign(win, 0.0);
    }

    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t c = 0; c < s.channels; ++c) {
            const std::size_t wi = b * s.channels + c;
            WindowGrads& wg = per_window[wi];
            std::copy(wg.d_input.begin(), wg.d_input.end(),
                      d_input.begin() + static_cast<std::ptrdiff_t>(wi * win));
            if (spec.kind == PoolKind::lae && !d_log_t.empty()) {
                const std::size_t slot =
                    spec.temperature.mode() == TemperatureMode::per_channel ? c : 0;
                d_log_t[slot] += wg.d_param;
            } else if (spec.kind == PoolKind::mixed) {
                d_pre_alpha[c] += wg.d_param;
            } else if (spec.kind == PoolKind::gated) {
                for (std::size_t i = 0; i < win; ++i) d_gate_w[i] += wg.d_gate[i];
            }
        }
    }
    return PoolGradients{Tensor(s, std::move(d_input), x.precision()), std::move(d_log_t),
                         std::move(d_pre_alpha), std::move(d_gate_w)};
}

} // namespace

PoolGradients global_pool_backward_serial(const Tensor& x, const PoolSpec& spec,
                                          const Tensor& upstream) {
    validate_backward(x, upstream);
    detail::validate_global_pool(x, spec);
    const Shape& s = x.shape();
    const std::size_t win = s.window();
    const std::span<const double> data = x.data();
    const std::span<const double> up = upstream.data();

    std::vector<WindowGrads> per_window(s.batch * s.channels);
    for (std::size_t i = 0; i < per_window.size(); ++i) {
        const std::size_t c = i % s.channels;
        per_window[i] = window_backward(data.subspan(i * win, win), c, spec, up[i]);
    }
    return reduce_windows(x, spec, per_window);
}

PoolGradients global_pool_backward(const Tensor& x, const PoolSpec& spec,
                                   const Tensor& upstream) {
    validate_backward(x, upstream);
    detail::validate_global_pool(x, spec);
    const Shape& s = x.shape();
    const std::size_t win = s.window();
    const std::span<const double> data = x.data();
    const std::span<const double> up = upstream.data();

    std::vector<WindowGrads> per_window(s.batch * s.channels);
    const std::int64_t total = static_cast<std::int64_t>(per_window.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < total; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        const std::size_t c = idx % s.channels;
        per_window[idx] = window_backward(data.subspan(idx * win, win), c, spec, up[idx]);
    }
    return reduce_windows(x, spec, per_window);
}

} // namespace lae
