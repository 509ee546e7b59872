#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "lae/precision.hpp"

using namespace lae;

TEST_CASE("round_half: exact halfway rounds to even") {
    CHECK(round_half(1.0 + std::ldexp(1.0, -11)) == 1.0);
    // halfway between 1 + 2^-10 (odd mantissa) and 1 + 2^-9 (even)
    CHECK(round_half(1.0 + 3.0 * std::ldexp(1.0, -11)) == 1.0 + std::ldexp(1.0, -9));
}

TEST_CASE("round_half: max-normal boundary") {
    CHECK(round_half(65504.0) == 65504.0);
    CHECK(round_half(65519.9) == 65504.0);
    CHECK(round_half(65520.0) == std::numeric_limits<double>::infinity());
    CHECK(round_half(-65520.0) == -std::numeric_limits<double>::infinity());
    CHECK(round_half(1e300) == std::numeric_limits<double>::infinity());
}

TEST_CASE("round_half: zero, NaN, infinity pass through") {
    CHECK(round_half(0.0) == 0.0);
    CHECK(std::signbit(round_half(-0.0)));
    CHECK(std::isnan(round_half(std::numeric_limits<double>::quiet_NaN())));
    CHECK(round_half(std::numeric_limits<double>::infinity()) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("round_half: subnormals preserved") {
    const double smallest = std::ldexp(1.0, -24);
    CHECK(round_half(smallest) == smallest);
    CHECK(round_half(std::ldexp(1.0, -25)) == 0.0);          // tie to even (zero)
    CHECK(round_half(std::ldexp(1.3, -20)) ==
          std::nearbyint(std::ldexp(1.3, -20) / smallest) * smallest);
}

TEST_CASE("round_half is idempotent and monotone") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> val(-70000.0, 70000.0);
    for (int i = 0; i < 2000; ++i) {
        const double a = val(rng);
        const double b = val(rng);
        const double ra = round_half(a);
        const double rb = round_half(b);
        CHECK(round_half(ra) == ra);
        if (a <= b) CHECK(ra <= rb);
    }
}

TEST_CASE("round_to: single matches float cast, double is identity") {
    CHECK(round_to(0.1, Precision::f32) == static_cast<double>(0.1f));
    CHECK(round_to(0.1, Precision::f64) == 0.1);
    CHECK(round_to(0.1, Precision::f16) == round_half(0.1));
}

TEST_CASE("lse_kernel: stable survives where naive overflows") {
    const std::vector<double> z{1000.0, 1000.0};
    const double stable = lse_kernel(z, KernelVariant::stable, Precision::f64);
    CHECK(stable == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
    CHECK(lse_kernel(z, KernelVariant::naive, Precision::f64) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("lse_kernel: single element") {
    const std::vector<double> z{0.0};
    CHECK(lse_kernel(z, KernelVariant::stable, Precision::f64) == 0.0);
    CHECK(lse_kernel(z, KernelVariant::naive, Precision::f64) == 0.0);
}

TEST_CASE("lse_kernel: empty window is an error") {
    CHECK_THROWS_AS(lse_kernel({}, KernelVariant::stable, Precision::f64), std::invalid_argument);
}

TEST_CASE("lse_kernel: stable agrees with naive in double where naive is finite") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> val(-50.0, 50.0);
    std::uniform_int_distribution<std::size_t> len(1, 64);
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<double> z(len(rng));
        for (double& v : z) v = val(rng);
        const double naive = lse_kernel(z, KernelVariant::naive, Precision::f64);
        if (!std::isfinite(naive)) continue;
        const double stable = lse_kernel(z, KernelVariant::stable, Precision::f64);
        CHECK(std::fabs(stable - naive) <= 1e-12 * std::max(1.0, std::fabs(naive)));
    }
}

TEST_CASE("lse_kernel: stable is finite for extreme finite inputs") {
    const std::vector<double> hot{1e4, -1e4, 5e3, 0.0};
    CHECK(std::isfinite(lse_kernel(hot, KernelVariant::stable, Precision::f64)));
    const std::vector<double> cold{-1e4, -1e4};
    CHECK(std::isfinite(lse_kernel(cold, KernelVariant::stable, Precision::f64)));
}

TEST_CASE("emulated f64 gradients match the closed forms") {
    const std::vector<double> z{-1.0, 0.0, 1.4, 1.6};
    const EmulatedLaeGradients g = lae_gradients_emulated(z, 1.0, Precision::f64);
    double sum = 0.0;
    for (double p : g.d_input) {
        CHECK(p > 0.0);
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.forward == doctest::Approx(0.9532118638249164).epsilon(1e-12));
}

TEST_CASE("sweep argument validation") {
    const auto windows = sample_sweep_windows(4, 4, 8, 1);
    const std::vector<double> grid{1.0};
    const std::vector<Precision> precs{Precision::f16};
    CHECK_THROWS_AS(lae_precision_sweep({}, grid, precs), std::invalid_argument);
    CHECK_THROWS_AS(lae_precision_sweep(windows, {}, precs), std::invalid_argument);
    CHECK_THROWS_AS(lae_precision_sweep(windows, grid, {}), std::invalid_argument);
}

TEST_CASE("precision sweep reproduces the half-precision breakdown trend") {
    const auto windows = sample_sweep_windows(128, 4, 32, 20240001);
    const std::vector<double> grid{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    const std::vector<Precision> precs{Precision::f16, Precision::f32};
    const auto rows = lae_precision_sweep(windows, grid, precs);
    REQUIRE(rows.size() == grid.size() * precs.size());

    auto row_for = [&](double t, Precision p) -> const SweepRow& {
        for (const SweepRow& r : rows) {
            if (r.t == t && r.precision == p) return r;
        }
        REQUIRE(false);
        return rows[0];
    };

    // Temperature-gradient error under half emulation: small at t=1,
    // at least an order of magnitude worse by t=64, and growing with t.
    const double base = row_for(1, Precision::f16).median_logt_grad_err;
    CHECK(base < 1e-2);
    CHECK(row_for(64, Precision::f16).median_logt_grad_err >= 10.0 * base);
    CHECK(row_for(1024, Precision::f16).median_logt_grad_err >= 1e3 * base);

    // Monotone within a small slack; the one systematic dip sits at the
    // first step, where the wider z - max subtraction scale at t=1
    // costs extra rounding.
    double prev = base;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = row_for(grid[i], Precision::f16).median_logt_grad_err;
        CHECK(cur >= 0.75 * prev);
        prev = cur;
    }

    // Input-gradient error under single precision stays at round-off
    // level for every temperature.
    for (double t : grid) {
        CHECK(row_for(t, Precision::f32).max_input_grad_err <= 1e-5);
    }

    // Half vs single sanity: half is always the worse of the two.
    for (double t : grid) {
        CHECK(row_for(t, Precision::f16).median_logt_grad_err >
              row_for(t, Precision::f32).median_logt_grad_err);
    }
}
