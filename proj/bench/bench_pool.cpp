// Compares the OpenMP global pooling kernels against the serial
// reference: wall time per operator plus a bitwise equality check.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "lae/grad.hpp"
#include "lae/pooling.hpp"
#include "lae/tensor.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool bitwise_equal(const lae::Tensor& a, const lae::Tensor& b) {
    if (!(a.shape() == b.shape())) return false;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        if (da[i] != db[i]) return false;
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    std::size_t batch = 64;
    std::size_t channels = 256;
    std::size_t side = 32;
    int repeats = 5;
    if (argc > 1 && std::string(argv[1]) == "--quick") {
        batch = 8;
        channels = 32;
        repeats = 2;
    }

    const lae::Shape shape{batch, channels, side, side};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::vector<double> values(shape.volume());
    for (double& v : values) v = val(rng);
    const lae::Tensor x(shape, std::move(values));

    struct Case {
        const char* name;
        lae::PoolSpec spec;
    };
    const std::vector<Case> cases{
        {"max", lae::PoolSpec::max_pool()},
        {"avg", lae::PoolSpec::avg_pool()},
        {"lse", lae::PoolSpec::lse_pool()},
        {"lae t=4", lae::PoolSpec::lae_pool(lae::TemperatureParam::fixed(4.0))},
        {"lae per-chn", lae::PoolSpec::lae_pool(lae::TemperatureParam::per_channel(4.0, channels))},
    };

    std::printf("global_pool forward, shape (%zu,%zu,%zu,%zu), %d repeats, %d threads\n", batch,
                channels, side, side, repeats, omp_get_max_threads());
    std::printf("%-12s %12s %12s %9s %9s\n", "operator", "serial(ms)", "openmp(ms)", "speedup",
                "bitwise");

    bool all_equal = true;
    for (const Case& c : cases) {
        // warm-up and equality check
        const lae::Tensor serial_out = lae::global_pool_serial(x, c.spec);
        const lae::Tensor parallel_out = lae::global_pool(x, c.spec);
        const bool equal = bitwise_equal(serial_out, parallel_out);
        all_equal = all_equal && equal;

        auto t0 = Clock::now();
        for (int r = 0; r < repeats; ++r) lae::global_pool_serial(x, c.spec);
        const double serial_ms = ms_since(t0) / repeats;

        t0 = Clock::now();
        for (int r = 0; r < repeats; ++r) lae::global_pool(x, c.spec);
        const double parallel_ms = ms_since(t0) / repeats;

        std::printf("%-12s %12.3f %12.3f %8.2fx %9s\n", c.name, serial_ms, parallel_ms,
                    serial_ms / parallel_ms, equal ? "equal" : "DIFFER");
    }

    // backward pass, LAE shared temperature
    {
        const lae::PoolSpec spec = lae::PoolSpec::lae_pool(lae::TemperatureParam::shared(4.0));
        const lae::Tensor upstream(lae::Shape{batch, channels, 1, 1},
                                   std::vector<double>(batch * channels, 1.0));
        const lae::PoolGradients gs = lae::global_pool_backward_serial(x, spec, upstream);
        const lae::PoolGradients gp = lae::global_pool_backward(x, spec, upstream);
        const bool equal = bitwise_equal(gs.d_input, gp.d_input) && gs.d_log_t == gp.d_log_t;
        all_equal = all_equal && equal;

        auto t0 = Clock::now();
        for (int r = 0; r < repeats; ++r) lae::global_pool_backward_serial(x, spec, upstream);
        const double serial_ms = ms_since(t0) / repeats;

        t0 = Clock::now();
        for (int r = 0; r < repeats; ++r) lae::global_pool_backward(x, spec, upstream);
        const double parallel_ms = ms_since(t0) / repeats;

        std::printf("%-12s %12.3f %12.3f %8.2fx %9s\n", "lae backward", serial_ms, parallel_ms,
                    serial_ms / parallel_ms, equal ? "equal" : "DIFFER");
    }

    if (!all_equal) {
        std::printf("FAIL: parallel kernels diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
