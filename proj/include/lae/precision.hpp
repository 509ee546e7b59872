#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lae/tensor.hpp"

namespace lae {

/// LogSumExp reduction strategy. The stable variant shifts by the window
/// maximum and never overflows on finite input; the naive variant
/// exponentiates directly and is kept as a falsifiable contrast.
enum class KernelVariant { stable, naive };

/// Nearest IEEE 754 binary16 value, ties to even. Values whose rounded
/// magnitude exceeds 65504 map to infinity; subnormals are preserved;
/// NaN passes through.
double round_half(double x);

/// Rounds to the representable set of the given precision
/// (f64 is the identity).
double round_to(double x, Precision precision);

/// LogSumExp of a window. Under f16/f32 the rounding is applied after
/// every elementary operation (cast, subtraction, exponential, each
/// accumulation step, logarithm, final addition) and accumulation runs
/// in canonical index order. Naive-variant overflow yields infinity
/// rather than an error so the contrast with the stable variant stays
/// observable.
double lse_kernel(std::span<const double> z, KernelVariant variant, Precision precision);

/// Pieces of the shift-by-max reduction over z/t, in full double
/// precision and without forming the scaled copy:
/// max(z) and log sum exp((z_i - max)/t). Callers assemble LSE or LAE
/// from these so constant windows stay bit-exact.
struct ShiftedLogSum {
    double max_value = 0.0;
    double log_sum = 0.0;
};
ShiftedLogSum stable_shifted_log_sum(std::span<const double> z, double t);

/// LSE(z/t) = max(z)/t + log sum exp((z_i - max)/t).
double stable_lse_scaled(std::span<const double> z, double t);

/// Temperature LAE forward under emulated precision, stable variant:
/// y = t * (LSE(z/t) - log n) with per-operation rounding.
double lae_forward_emulated(std::span<const double> z, double t, Precision precision);

/// Forward value and both derivatives of temperature LAE under emulated
/// precision: d_input is softargmax(z/t), d_log_t is y - sum z_i p_i.
struct EmulatedLaeGradients {
    double forward = 0.0;
    std::vector<double> d_input;
    double d_log_t = 0.0;
};
EmulatedLaeGradients lae_gradients_emulated(std::span<const double> z, double t,
                                            Precision precision);

/// One sweep cell: relative errors of the emulated forward, input
/// gradient (L2 over the window) and log-temperature gradient against
/// the double-precision reference, aggregated over the sample windows.
struct SweepRow {
    double t = 0.0;
    Precision precision = Precision::f64;
    double median_forward_err = 0.0;
    double max_forward_err = 0.0;
    double median_input_grad_err = 0.0;
    double max_input_grad_err = 0.0;
    double median_logt_grad_err = 0.0;
    double max_logt_grad_err = 0.0;
};

/// Runs the underflow diagnostic over every (t, precision) cell.
/// Cells are independent and evaluated in parallel; rows come back in
/// grid order. Throws std::invalid_argument on empty inputs.
std::vector<SweepRow> lae_precision_sweep(const std::vector<std::vector<double>>& windows,
                                          std::span<const double> t_grid,
                                          std::span<const Precision> precisions);

/// Deterministic window sampler for the sweep and its tests: `count`
/// windows with lengths in [min_len, max_len] and values uniform in
/// [-5, 5].
std::vector<std::vector<double>> sample_sweep_windows(std::size_t count, std::size_t min_len,
                                                      std::size_t max_len, std::uint64_t seed);

} // namespace lae
