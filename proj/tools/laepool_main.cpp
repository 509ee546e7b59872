#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "lae/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"LogAvgExp pooling operator library: reproduction commands"};
    app.require_subcommand(1);

    // fig1
    std::string fig1_out = "-";
    CLI::App* fig1 = app.add_subcommand("fig1", "2x2 example matrix: pooled values and gradients");
    fig1->add_option("--out", fig1_out, "output CSV path ('-' for stdout)");

    // gradcheck
    std::uint64_t gc_seed = 1;
    std::size_t gc_cases = 200;
    double gc_tol = 1e-5;
    std::string gc_out = "-";
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "analytic gradients vs the finite-difference oracle");
    gradcheck->add_option("--seed", gc_seed, "RNG seed");
    gradcheck->add_option("--cases", gc_cases, "random cases per check");
    gradcheck->add_option("--tolerance", gc_tol, "max allowed relative error");
    gradcheck->add_option("--out", gc_out, "output CSV path ('-' for stdout)");

    // precision-sweep
    std::vector<double> ps_grid{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    std::vector<std::string> ps_precisions{"half", "single"};
    std::string ps_out = "-";
    CLI::App* sweep = app.add_subcommand(
        "precision-sweep", "LAE forward/gradient error under emulated reduced precision");
    sweep->add_option("--t-grid", ps_grid, "temperature grid");
    sweep->add_option("--precisions", ps_precisions, "precisions to emulate (half single double)");
    sweep->add_option("--out", ps_out, "output CSV path ('-' for stdout)");

    // train
    std::string tr_pool = "lae";
    double tr_t0 = 4.0;
    std::string tr_mode = "shared";
    std::uint64_t tr_seed = 1;
    std::string tr_out = "-";
    std::string tr_model_out;
    CLI::App* tr = app.add_subcommand("train", "train on the default synthetic task");
    tr->add_option("--pool", tr_pool, "pooling operator (max|avg|lse|lae|mixed|gated)");
    tr->add_option("--t0", tr_t0, "initial LAE temperature");
    tr->add_option("--mode", tr_mode, "temperature mode (fixed|shared|per_channel)");
    tr->add_option("--seed", tr_seed, "RNG seed");
    tr->add_option("--out", tr_out, "per-epoch record CSV path ('-' for stdout)");
    tr->add_option("--save-model", tr_model_out, "flat weight CSV to write after training");

    // robustness
    std::string rb_model;
    std::string rb_transform = "zoom";
    std::vector<std::size_t> rb_sizes{2, 3, 4, 6, 9, 12};
    std::uint64_t rb_seed = 1;
    std::string rb_out = "-";
    CLI::App* rb = app.add_subcommand("robustness", "accuracy vs input size per pooling operator");
    rb->add_option("--model", rb_model, "flat weight CSV (omit to retrain avg and LAE models)");
    rb->add_option("--transform", rb_transform,
                   "resize transform (zoom|crop_or_pad_zero|crop_or_pad_normal)");
    rb->add_option("--sizes", rb_sizes, "target spatial sizes");
    rb->add_option("--seed", rb_seed, "RNG seed");
    rb->add_option("--out", rb_out, "output CSV path ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? lae::cli::kExitOk : lae::cli::kExitUsage;
    }

    if (fig1->parsed()) {
        return lae::cli::write_report(fig1_out, [](std::ostream& out) { lae::cli::cmd_fig1(out); });
    }
    if (gradcheck->parsed()) {
        int inner = lae::cli::kExitOk;
        const int io = lae::cli::write_report(gc_out, [&](std::ostream& out) {
            inner = lae::cli::cmd_gradcheck(gc_seed, gc_cases, gc_tol, out);
        });
        return io != lae::cli::kExitOk ? io : inner;
    }
    if (sweep->parsed()) {
        return lae::cli::cmd_precision_sweep(ps_grid, ps_precisions, ps_out);
    }
    if (tr->parsed()) {
        return lae::cli::cmd_train(tr_pool, tr_t0, tr_mode, tr_seed, tr_out, tr_model_out);
    }
    if (rb->parsed()) {
        return lae::cli::cmd_robustness(rb_model, rb_transform, rb_sizes, rb_seed, rb_out);
    }
    return lae::cli::kExitUsage;
}
