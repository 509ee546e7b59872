#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lae/grad.hpp"
#include "lae/pooling.hpp"
#include "lae/tensor.hpp"

using namespace lae;

namespace {

const std::vector<double> kFig1{-1.0, 0.0, 1.4, 1.6};
const std::vector<double> kFig1Swapped{-1.0, 0.0, 1.6, 1.4};

double l2_rel(std::span<const double> got, std::span<const double> want) {
    double d2 = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double d = got[i] - want[i];
        d2 += d * d;
        w2 += want[i] * want[i];
    }
    return std::sqrt(d2) / std::max(std::sqrt(w2), 1e-4);
}

std::vector<double> random_window(std::mt19937_64& rng, std::size_t min_len = 2,
                                  std::size_t max_len = 64) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::vector<double> z(len(rng));
    for (double& v : z) v = val(rng);
    return z;
}

std::vector<double> gapped_window(std::mt19937_64& rng, std::size_t min_len = 2,
                                  std::size_t max_len = 64) {
    for (;;) {
        std::vector<double> z = random_window(rng, min_len, max_len);
        std::vector<double> sorted = z;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[z.size() - 1] - sorted[z.size() - 2] > 1e-3) return z;
    }
}

} // namespace

// --- the oracle itself --------------------------------------------------------

TEST_CASE("finite_diff_oracle: gradient of a sum is all ones") {
    const std::vector<double> z{0.3, -1.2, 5.0};
    const std::vector<double> g = finite_diff_oracle(
        [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }, z,
        1e-5);
    for (double gi : g) CHECK(std::fabs(gi - 1.0) < 1e-10);
}

TEST_CASE("finite_diff_oracle: h must be positive") {
    const std::vector<double> z{1.0};
    const auto f = [](std::span<const double> v) { return v[0]; };
    CHECK_THROWS_AS(finite_diff_oracle(f, z, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_oracle(f, z, -1e-5), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_scalar([](double x) { return x; }, 0.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("finite_diff_scalar sanity") {
    CHECK(std::fabs(finite_diff_scalar([](double x) { return x * x; }, 3.0, 1e-6) - 6.0) < 1e-8);
}

// --- LAE input gradient -------------------------------------------------------

TEST_CASE("lae_backward_input: oracle-frozen 2x2 values") {
    const std::vector<double> p = lae_backward_input(kFig1, 1.0);
    const std::vector<double> frozen{0.03545445992807437, 0.09637521416031394,
                                     0.3908207652675535, 0.4773495606440582};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(p[i] - frozen[i]) < 1e-12);

    const std::vector<double> fd = finite_diff_oracle(
        [](std::span<const double> v) { return pool_lae(v, 1.0); }, kFig1, 1e-6);
    CHECK(l2_rel(p, fd) < 1e-6);
}

TEST_CASE("lae_backward_input: constant window gives the uniform vector") {
    const std::vector<double> z(6, 2.5);
    for (double pi : lae_backward_input(z, 3.0)) CHECK(std::fabs(pi - 1.0 / 6.0) < 1e-15);
}

TEST_CASE("lae_backward_input: tiny t saturates onto the unique max") {
    const std::vector<double> p = lae_backward_input(kFig1, 1e-6);
    CHECK(p[3] >= 1.0 - 1e-9);
    CHECK(p[0] <= 1e-9);
    CHECK(p[1] <= 1e-9);
    CHECK(p[2] <= 1e-9);
}

TEST_CASE("lae_backward_input: errors") {
    CHECK_THROWS_AS(lae_backward_input(kFig1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lae_backward_input({}, 1.0), std::invalid_argument);
}

TEST_CASE("lae input gradients are a proper distribution") {
    std::mt19937_64 rng(71);
    for (int iter = 0; iter < 300; ++iter) {
        const std::vector<double> z = random_window(rng);
        for (double t : {0.25, 1.0, 4.0, 16.0}) {
            const std::vector<double> p = lae_backward_input(z, t);
            double sum = 0.0;
            for (double pi : p) {
                CHECK(pi > 0.0);
                sum += pi;
            }
            CHECK(std::fabs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("lae gradient is continuous where the max gradient jumps") {
    const double eps = 1e-9;
    const std::vector<double> a{0.0, 1.0, 1.0 + eps};
    const std::vector<double> b{0.0, 1.0 + eps, 1.0};

    const std::vector<double> ga = max_backward(a);
    const std::vector<double> gb = max_backward(b);
    CHECK(ga == std::vector<double>{0.0, 0.0, 1.0});
    CHECK(gb == std::vector<double>{0.0, 1.0, 0.0}); // the one-hot jumped

    const std::vector<double> pa = lae_backward_input(a, 1.0);
    const std::vector<double> pb = lae_backward_input(b, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(pa[i] - pb[i]) < 1e-8);
}

// --- LAE temperature gradient ---------------------------------------------------

TEST_CASE("lae_backward_logt: oracle-frozen 2x2 value") {
    const double g = lae_backward_logt(kFig1, 1.0);
    CHECK(std::fabs(g - (-0.3222420446520772)) < 1e-12);

    const double fd = finite_diff_scalar(
        [](double logt) { return pool_lae(kFig1, std::exp(logt)); }, 0.0, 1e-6);
    CHECK(std::fabs(g - fd) < 1e-8);
}

TEST_CASE("lae_backward_logt: constant window gives zero") {
    const std::vector<double> z(9, -4.2);
    CHECK(std::fabs(lae_backward_logt(z, 2.0)) < 1e-12);
}

TEST_CASE("lae_backward_logt is never positive") {
    std::mt19937_64 rng(73);
    for (int iter = 0; iter < 10000; ++iter) {
        const std::vector<double> z = random_window(rng, 2, 16);
        std::uniform_real_distribution<double> tdist(0.1, 16.0);
        CHECK(lae_backward_logt(z, tdist(rng)) <= 1e-12);
    }
}

TEST_CASE("lae_backward_logt: errors") {
    CHECK_THROWS_AS(lae_backward_logt(kFig1, -1.0), std::invalid_argument);
}

// --- max / avg -----------------------------------------------------------------

TEST_CASE("max_backward routes to the maximum value") {
    CHECK(max_backward(kFig1) == std::vector<double>{0.0, 0.0, 0.0, 1.0});
    CHECK(max_backward(kFig1Swapped) == std::vector<double>{0.0, 0.0, 1.0, 0.0});
    CHECK(max_backward(std::vector<double>{5.0, 5.0}) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("avg_backward is uniform and permutation-blind") {
    CHECK(avg_backward(kFig1) == std::vector<double>(4, 0.25));
    CHECK(avg_backward(std::vector<double>{9.0}) == std::vector<double>{1.0});
    CHECK(avg_backward(kFig1) == avg_backward(kFig1Swapped));
}

TEST_CASE("the 2x2 panels: max jumps, avg is blind, lae follows the value") {
    // Swapping 1.4 and 1.6 moves the max one-hot, leaves avg untouched,
    // and permutes the LAE weights with the values.
    CHECK(max_backward(kFig1) != max_backward(kFig1Swapped));
    CHECK(avg_backward(kFig1) == avg_backward(kFig1Swapped));
    const std::vector<double> p = lae_backward_input(kFig1, 1.0);
    const std::vector<double> ps = lae_backward_input(kFig1Swapped, 1.0);
    CHECK(p[0] == ps[0]);
    CHECK(p[1] == ps[1]);
    CHECK(p[2] == ps[3]);
    CHECK(p[3] == ps[2]);
}

// --- mixed / gated ---------------------------------------------------------------

TEST_CASE("mixed_backward endpoints and 2x2 value") {
    CHECK(mixed_backward(kFig1, 0.0).d_input == avg_backward(kFig1));
    CHECK(mixed_backward(kFig1, 1.0).d_input == max_backward(kFig1));

    const MixedBackward mb = mixed_backward(kFig1, 0.5);
    const std::vector<double> frozen{0.125, 0.125, 0.125, 0.625};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(mb.d_input[i] - frozen[i]) < 1e-12);
    CHECK(std::fabs(mb.d_pre_alpha - 0.275) < 1e-12);

    CHECK_THROWS_AS(mixed_backward(kFig1, 1.5), std::invalid_argument);
}

TEST_CASE("mixed_backward matches finite differences") {
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> alpha_dist(0.05, 0.95);
    for (int iter = 0; iter < 200; ++iter) {
        const std::vector<double> z = gapped_window(rng);
        const double alpha = alpha_dist(rng);
        const MixedBackward mb = mixed_backward(z, alpha);
        const std::vector<double> fd = finite_diff_oracle_scaled(
            [alpha](std::span<const double> v) { return pool_mixed(v, alpha); }, z, 1e-5);
        CHECK(l2_rel(mb.d_input, fd) < 1e-5);

        const double pre = std::log(alpha / (1.0 - alpha));
        const double fd_alpha = finite_diff_scalar(
            [&z](double p) { return pool_mixed(z, sigmoid(p)); }, pre, 1e-5);
        CHECK(std::fabs(mb.d_pre_alpha - fd_alpha) /
                  std::max(std::fabs(fd_alpha), 1e-4) < 1e-5);
    }
}

TEST_CASE("gated_backward: zero gate and constant window") {
    const GatedBackward gb = gated_backward(kFig1, std::vector<double>(4, 0.0));
    const std::vector<double> frozen{-0.275, 0.0, 0.385, 0.44};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(gb.d_gate_w[i] - frozen[i]) < 1e-12);

    const std::vector<double> flat(5, 1.8);
    const GatedBackward gf = gated_backward(flat, std::vector<double>(5, 0.3));
    for (double g : gf.d_gate_w) CHECK(g == 0.0);

    CHECK_THROWS_AS(gated_backward(kFig1, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("gated_backward matches finite differences") {
    std::mt19937_64 rng(83);
    std::uniform_real_distribution<double> gate(-1.0, 1.0);
    for (int iter = 0; iter < 200; ++iter) {
        const std::vector<double> z = gapped_window(rng);
        std::vector<double> w(z.size());
        for (double& v : w) v = gate(rng);

        const GatedBackward gb = gated_backward(z, w);
        const std::vector<double> fd_z = finite_diff_oracle_scaled(
            [&w](std::span<const double> v) { return pool_gated(v, w); }, z, 1e-5);
        CHECK(l2_rel(gb.d_input, fd_z) < 1e-5);

        const std::vector<double> fd_w = finite_diff_oracle_scaled(
            [&z](std::span<const double> v) { return pool_gated(z, v); }, w, 1e-5);
        CHECK(l2_rel(gb.d_gate_w, fd_w) < 1e-5);
    }
}

// --- cross-entropy head ----------------------------------------------------------

TEST_CASE("softargmax_xent_backward basics") {
    const std::vector<double> even{0.0, 0.0};
    const std::vector<double> g = softargmax_xent_backward(even, 0);
    CHECK(std::fabs(g[0] + 0.5) < 1e-15);
    CHECK(std::fabs(g[1] - 0.5) < 1e-15);

    const std::vector<double> confident{30.0, 0.0, 0.0};
    for (double gi : softargmax_xent_backward(confident, 0)) CHECK(std::fabs(gi) < 1e-12);

    CHECK_THROWS_AS(softargmax_xent_backward(even, 2), std::invalid_argument);
}

TEST_CASE("softargmax_xent_backward matches finite differences") {
    std::mt19937_64 rng(89);
    for (int iter = 0; iter < 100; ++iter) {
        const std::vector<double> logits = random_window(rng, 2, 10);
        std::uniform_int_distribution<std::size_t> target_dist(0, logits.size() - 1);
        const std::size_t target = target_dist(rng);
        const std::vector<double> g = softargmax_xent_backward(logits, target);
        const std::vector<double> fd = finite_diff_oracle_scaled(
            [target](std::span<const double> v) { return -std::log(softargmax(v)[target]); },
            logits, 1e-5);
        CHECK(l2_rel(g, fd) < 1e-5);
    }
}

// --- whole-tensor backward --------------------------------------------------------

TEST_CASE("global_pool_backward agrees with differentiating through global_pool") {
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    const Shape shape{2, 3, 2, 2};
    std::vector<double> values(shape.volume());
    for (double& v : values) v = val(rng);
    const Tensor x = tensor_from(shape, values);

    std::vector<double> up_values(shape.batch * shape.channels);
    for (double& v : up_values) v = val(rng);
    const Tensor upstream({shape.batch, shape.channels, 1, 1}, up_values);

    TemperatureParam temp = TemperatureParam::shared(2.0);
    const std::vector<PoolSpec> specs{
        PoolSpec::avg_pool(),
        PoolSpec::lse_pool(),
        PoolSpec::lae_pool(temp),
        PoolSpec::mixed_pool(MixedParam{std::vector<double>{0.2, -0.4, 0.9}}),
        PoolSpec::gated_pool(GateParam{std::vector<double>{0.1, -0.3, 0.5, 0.2}}),
    };

    for (const PoolSpec& spec : specs) {
        const PoolGradients pg = global_pool_backward(x, spec, upstream);
        REQUIRE(pg.d_input.shape() == shape);

        // loss = sum upstream .* global_pool(x)
        const auto loss = [&](std::span<const double> flat) {
            const Tensor probe = tensor_from(shape, flat);
            const Tensor pooled = global_pool_serial(probe, spec);
            double acc = 0.0;
            for (std::size_t i = 0; i < up_values.size(); ++i) {
                acc += up_values[i] * pooled.data()[i];
            }
            return acc;
        };
        const std::vector<double> fd = finite_diff_oracle_scaled(loss, values, 1e-6);
        CHECK(l2_rel(pg.d_input.data(), fd) < 1e-5);
    }
}

TEST_CASE("global_pool_backward accumulates the shared temperature gradient") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    const Shape shape{2, 2, 3, 3};
    std::vector<double> values(shape.volume());
    for (double& v : values) v = val(rng);
    const Tensor x = tensor_from(shape, values);
    const Tensor upstream({2, 2, 1, 1}, std::vector<double>{0.7, -0.2, 1.3, 0.4});

    const double t0 = 3.0;
    const PoolGradients pg =
        global_pool_backward(x, PoolSpec::lae_pool(TemperatureParam::shared(t0)), upstream);
    REQUIRE(pg.d_log_t.size() == 1);

    const double fd = finite_diff_scalar(
        [&](double logt) {
            const Tensor pooled = global_pool_serial(
                x, PoolSpec::lae_pool(TemperatureParam::shared(std::exp(logt))));
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) acc += upstream.data()[i] * pooled.data()[i];
            return acc;
        },
        std::log(t0), 1e-6);
    CHECK(std::fabs(pg.d_log_t[0] - fd) < 1e-6);
}

TEST_CASE("global_pool_backward: per-channel temperature and fixed mode") {
    const Shape shape{2, 2, 2, 2};
    std::vector<double> values(shape.volume(), 0.0);
    std::iota(values.begin(), values.end(), 0.0);
    const Tensor x = tensor_from(shape, values);
    const Tensor upstream({2, 2, 1, 1}, std::vector<double>(4, 1.0));

    const PoolGradients per_chn = global_pool_backward(
        x, PoolSpec::lae_pool(TemperatureParam::per_channel(2.0, 2)), upstream);
    CHECK(per_chn.d_log_t.size() == 2);

    const PoolGradients fixed = global_pool_backward(
        x, PoolSpec::lae_pool(TemperatureParam::fixed(2.0)), upstream);
    CHECK(fixed.d_log_t.empty());
}

TEST_CASE("global_pool_backward validates the upstream shape") {
    const Tensor x = Tensor::zeros(Shape{2, 3, 2, 2});
    const Tensor bad = Tensor::zeros(Shape{2, 3, 2, 2});
    CHECK_THROWS_AS(global_pool_backward(x, PoolSpec::avg_pool(), bad), std::invalid_argument);
}
