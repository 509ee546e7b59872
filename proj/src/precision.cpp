#include "lae/precision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace lae {

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double rel_err(double value, double reference) {
    return std::fabs(value - reference) / std::max(std::fabs(reference), 1e-300);
}

} // namespace

double round_half(double x) {
    if (std::isnan(x) || std::isinf(x) || x == 0.0) return x;
    const double mag = std::fabs(x);
    // Midpoint between the binary16 max normal (65504) and the next step;
    // ties-to-even sends it to infinity.
    if (mag >= 65520.0) return std::copysign(std::numeric_limits<double>::infinity(), x);
    int exp = std::ilogb(mag);
    if (exp < -14) exp = -14; // subnormal range has a fixed quantum of 2^-24
    const double quantum = std::ldexp(1.0, exp - 10);
    const double rounded = std::nearbyint(x / quantum) * quantum;
    if (std::fabs(rounded) > 65504.0) {
        return std::copysign(std::numeric_limits<double>::infinity(), x);
    }
    return rounded;
}

double round_to(double x, Precision precision) {
    switch (precision) {
        case Precision::f16: return round_half(x);
        case Precision::f32: return static_cast<double>(static_cast<float>(x));
        case Precision::f64: return x;
    }
    return x;
}

double lse_kernel(std::span<const double> z, KernelVariant variant, Precision precision) {
    if (z.empty()) throw std::invalid_argument("lse_kernel: empty window");
    const auto rnd = [precision](double v) { return round_to(v, precision); };

    if (variant == KernelVariant::stable) {
        double m = -std::numeric_limits<double>::infinity();
        for (double zi : z) m = std::max(m, rnd(zi));
        double sum = 0.0;
        bool first = true;
        for (double zi : z) {
            const double d = rnd(rnd(zi) - m);
            const double e = rnd(std::exp(d));
            sum = first ? e : rnd(sum + e);
            first = false;
        }
        return rnd(m + rnd(std::log(sum)));
    }

    double sum = 0.0;
    bool first = true;
    for (double zi : z) {
        const double e = rnd(std::exp(rnd(zi)));
        sum = first ? e : rnd(sum + e);
        first = false;
    }
    return rnd(std::log(sum));
}

ShiftedLogSum stable_shifted_log_sum(std::span<const double> z, double t) {
    double m = -std::numeric_limits<double>::infinity();
    for (double zi : z) m = std::max(m, zi);
    double sum = 0.0;
    for (double zi : z) sum += std::exp((zi - m) / t);
    return {m, std::log(sum)};
}

double stable_lse_scaled(std::span<const double> z, double t) {
    const ShiftedLogSum s = stable_shifted_log_sum(z, t);
    return s.max_value / t + s.log_sum;
}

double lae_forward_emulated(std::span<const double> z, double t, Precision precision) {
    return lae_gradients_emulated(z, t, precision).forward;
}

EmulatedLaeGradients lae_gradients_emulated(std::span<const double> z, double t,
                                            Precision precision) {
    if (z.empty()) throw std::invalid_argument("lae_gradients_emulated: empty window");
    if (!(t > 0.0)) throw std::invalid_argument("lae_gradients_emulated: t must be positive");
    const auto rnd = [precision](double v) { return round_to(v, precision); };
    const std::size_t n = z.size();

    const double tt = rnd(t);
    std::vector<double> u(n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = rnd(rnd(z[i]) / tt);
        m = std::max(m, u[i]);
    }
    std::vector<double> e(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rnd(u[i] - m);
        e[i] = rnd(std::exp(d));
        sum = (i == 0) ? e[i] : rnd(sum + e[i]);
    }

    EmulatedLaeGradients out;
    const double lse = rnd(m + rnd(std::log(sum)));
    const double bias = rnd(lse - rnd(std::log(static_cast<double>(n))));
    out.forward = rnd(tt * bias);

    out.d_input.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.d_input[i] = rnd(e[i] / sum);

    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double term = rnd(rnd(z[i]) * out.d_input[i]);
        weighted = (i == 0) ? term : rnd(weighted + term);
    }
    out.d_log_t = rnd(out.forward - weighted);
    return out;
}

std::vector<SweepRow> lae_precision_sweep(const std::vector<std::vector<double>>& windows,
                                          std::span<const double> t_grid,
                                          std::span<const Precision> precisions) {
    if (windows.empty()) throw std::invalid_argument("lae_precision_sweep: no sample windows");
    if (t_grid.empty()) throw std::invalid_argument("lae_precision_sweep: empty temperature grid");
    if (precisions.empty()) throw std::invalid_argument("lae_precision_sweep: empty precision set");
    for (const auto& w : windows) {
        if (w.empty()) throw std::invalid_argument("lae_precision_sweep: empty window");
    }

    const std::int64_t nt = static_cast<std::int64_t>(t_grid.size());
    const std::int64_t np = static_cast<std::int64_t>(precisions.size());
    std::vector<SweepRow> rows(static_cast<std::size_t>(nt * np));

#pragma omp parallel for collapse(2) schedule(dynamic)
    for (std::int64_t it = 0; it < nt; ++it) {
        for (std::int64_t ip = 0; ip < np; ++ip) {
            const double t = t_grid[static_cast<std::size_t>(it)];
            const Precision prec = precisions[static_cast<std::size_t>(ip)];
            std::vector<double> fwd_errs, input_errs, logt_errs;
            fwd_errs.reserve(windows.size());
            input_errs.reserve(windows.size());
            logt_errs.reserve(windows.size());
            for (const auto& w : windows) {
                const EmulatedLaeGradients ref = lae_gradients_emulated(w, t, Precision::f64);
                const EmulatedLaeGradients em = lae_gradients_emulated(w, t, prec);
                fwd_errs.push_back(rel_err(em.forward, ref.forward));
                double diff2 = 0.0, ref2 = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double d = em.d_input[i] - ref.d_input[i];
                    diff2 += d * d;
                    ref2 += ref.d_input[i] * ref.d_input[i];
                }
                input_errs.push_back(std::sqrt(diff2) / std::sqrt(ref2));
                logt_errs.push_back(rel_err(em.d_log_t, ref.d_log_t));
            }
            SweepRow& row = rows[static_cast<std::size_t>(it * np + ip)];
            row.t = t;
            row.precision = prec;
            row.median_forward_err = median_of(fwd_errs);
            row.max_forward_err = *std::max_element(fwd_errs.begin(), fwd_errs.end());
            row.median_input_grad_err = median_of(input_errs);
            row.max_input_grad_err = *std::max_element(input_errs.begin(), input_errs.end());
            row.median_logt_grad_err = median_of(logt_errs);
            row.max_logt_grad_err = *std::max_element(logt_errs.begin(), logt_errs.end());
        }
    }
    return rows;
}

std::vector<std::vector<double>> sample_sweep_windows(std::size_t count, std::size_t min_len,
                                                      std::size_t max_len, std::uint64_t seed) {
    if (count == 0 || min_len == 0 || max_len < min_len) {
        throw std::invalid_argument("sample_sweep_windows: bad sampling parameters");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    std::uniform_real_distribution<double> val_dist(-5.0, 5.0);
    std::vector<std::vector<double>> windows(count);
    for (auto& w : windows) {
        w.resize(len_dist(rng));
        for (double& v : w) v = val_dist(rng);
    }
    return windows;
}

} // namespace lae
