#include "lae/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lae/csv.hpp"
#include "lae/grad.hpp"
#include "lae/precision.hpp"

namespace lae::cli {

namespace {

const char* precision_name(Precision p) {
    switch (p) {
        case Precision::f16: return "half";
        case Precision::f32: return "single";
        case Precision::f64: return "double";
    }
    return "?";
}

Precision parse_precision(const std::string& name) {
    if (name == "half") return Precision::f16;
    if (name == "single") return Precision::f32;
    if (name == "double") return Precision::f64;
    throw std::invalid_argument("unknown precision '" + name + "' (half|single|double)");
}

ResizeTransform parse_transform(const std::string& name) {
    if (name == "zoom") return ResizeTransform::zoom;
    if (name == "crop_or_pad_zero") return ResizeTransform::crop_or_pad_zero;
    if (name == "crop_or_pad_normal") return ResizeTransform::crop_or_pad_normal;
    throw std::invalid_argument("unknown transform '" + name +
                                "' (zoom|crop_or_pad_zero|crop_or_pad_normal)");
}

const char* pool_name(PoolKind kind) {
    switch (kind) {
        case PoolKind::max: return "max";
        case PoolKind::avg: return "avg";
        case PoolKind::lse: return "lse";
        case PoolKind::lae: return "lae";
        case PoolKind::mixed: return "mixed";
        case PoolKind::gated: return "gated";
    }
    return "?";
}

const char* mode_name(TemperatureMode mode) {
    switch (mode) {
        case TemperatureMode::fixed: return "fixed";
        case TemperatureMode::shared: return "shared";
        case TemperatureMode::per_channel: return "per_channel";
    }
    return "?";
}

TemperatureMode parse_mode(const std::string& name) {
    if (name == "fixed") return TemperatureMode::fixed;
    if (name == "shared") return TemperatureMode::shared;
    if (name == "per_channel") return TemperatureMode::per_channel;
    throw std::invalid_argument("unknown temperature mode '" + name +
                                "' (fixed|shared|per_channel)");
}

PoolSpec make_spec(const std::string& kind, double t0, TemperatureMode mode,
                   std::size_t channels, std::size_t window) {
    if (kind == "max") return PoolSpec::max_pool();
    if (kind == "avg") return PoolSpec::avg_pool();
    if (kind == "lse") return PoolSpec::lse_pool();
    if (kind == "lae") {
        switch (mode) {
            case TemperatureMode::fixed: return PoolSpec::lae_pool(TemperatureParam::fixed(t0));
            case TemperatureMode::shared: return PoolSpec::lae_pool(TemperatureParam::shared(t0));
            case TemperatureMode::per_channel:
                return PoolSpec::lae_pool(TemperatureParam::per_channel(t0, channels));
        }
    }
    if (kind == "mixed") return PoolSpec::mixed_pool(MixedParam{std::vector<double>(channels, 0.0)});
    if (kind == "gated") return PoolSpec::gated_pool(GateParam{std::vector<double>(window, 0.0)});
    throw std::invalid_argument("unknown pool kind '" + kind +
                                "' (max|avg|lse|lae|mixed|gated)");
}

void write_grad_row(std::ostream& out, const std::string& op, const std::string& param,
                    double value, std::span<const double> grad) {
    out << op << ',' << param << ',' << csv::fmt(value);
    for (double g : grad) out << ',' << csv::fmt(g);
    out << '\n';
}

double l2_rel_err(std::span<const double> got, std::span<const double> want) {
    double diff2 = 0.0, want2 = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double d = got[i] - want[i];
        diff2 += d * d;
        want2 += want[i] * want[i];
    }
    return std::sqrt(diff2) / std::max(std::sqrt(want2), 1e-4);
}

double scalar_rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(std::fabs(want), 1e-4);
}

/// Random window whose top-two entries are separated enough that a
/// finite-difference probe cannot cross the max tie.
std::vector<double> gapped_window(std::mt19937_64& rng, std::size_t len) {
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::vector<double> z(len);
    for (;;) {
        for (double& v : z) v = val(rng);
        if (len == 1) return z;
        std::vector<double> sorted = z;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[len - 1] - sorted[len - 2] > 1e-3) return z;
    }
}

} // namespace

int write_report(const std::string& out_path, const std::function<void(std::ostream&)>& body) {
    try {
        if (out_path.empty() || out_path == "-") {
            body(std::cout);
            return kExitOk;
        }
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot open '" << out_path << "' for writing\n";
            return kExitIo;
        }
        body(out);
        if (!out) {
            std::cerr << "error: write to '" << out_path << "' failed\n";
            return kExitIo;
        }
        return kExitOk;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

int cmd_fig1(std::ostream& out) {
    const std::vector<double> z{-1.0, 0.0, 1.4, 1.6};

    out << "# schema: lae-fig1-v1\n";
    out << "operator,param,value,grad_00,grad_01,grad_10,grad_11\n";
    write_grad_row(out, "max", "", pool_max(z), max_backward(z));
    write_grad_row(out, "avg", "", pool_avg(z), avg_backward(z));
    const MixedBackward mb = mixed_backward(z, 0.5);
    write_grad_row(out, "mixed", "alpha=0.5", pool_mixed(z, 0.5), mb.d_input);
    for (double t : {0.5, 1.0, 2.0}) {
        std::ostringstream param;
        param << "t=" << csv::fmt(t);
        write_grad_row(out, "lae", param.str(), pool_lae(z, t), lae_backward_input(z, t));
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t cases, double tolerance, std::ostream& out) {
    if (cases == 0) {
        std::cerr << "error: --cases must be >= 1\n";
        return kExitUsage;
    }
    if (!(tolerance > 0.0)) {
        std::cerr << "error: --tolerance must be positive\n";
        return kExitUsage;
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len_dist(2, 64);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> alpha_dist(0.05, 0.95);
    std::uniform_real_distribution<double> gate_dist(-1.0, 1.0);
    const double h0 = 1e-5;
    const std::vector<double> t_grid{0.25, 1.0, 4.0, 16.0};

    struct CheckRow {
        std::string name;
        std::size_t count = 0;
        double max_err = 0.0;
    };
    std::vector<CheckRow> rows;

    for (double t : t_grid) {
        CheckRow input_row{"lae_input_t=" + csv::fmt(t), 0, 0.0};
        CheckRow logt_row{"lae_logt_t=" + csv::fmt(t), 0, 0.0};
        for (std::size_t k = 0; k < cases; ++k) {
            std::vector<double> z(len_dist(rng));
            for (double& v : z) v = val(rng);

            const std::vector<double> analytic = lae_backward_input(z, t);
            const std::vector<double> fd = finite_diff_oracle_scaled(
                [t](std::span<const double> v) { return pool_lae(v, t); }, z, h0);
            input_row.max_err = std::max(input_row.max_err, l2_rel_err(analytic, fd));
            ++input_row.count;

            const double analytic_logt = lae_backward_logt(z, t);
            const double fd_logt = finite_diff_scalar(
                [&z](double logt) { return pool_lae(z, std::exp(logt)); }, std::log(t),
                h0 * (std::fabs(std::log(t)) + 1.0));
            logt_row.max_err = std::max(logt_row.max_err, scalar_rel_err(analytic_logt, fd_logt));
            ++logt_row.count;
        }
        rows.push_back(input_row);
        rows.push_back(logt_row);
    }

    {
        CheckRow dz_row{"mixed_input", 0, 0.0};
        CheckRow da_row{"mixed_pre_alpha", 0, 0.0};
        for (std::size_t k = 0; k < cases; ++k) {
            const std::vector<double> z = gapped_window(rng, len_dist(rng));
            const double alpha = alpha_dist(rng);
            const MixedBackward analytic = mixed_backward(z, alpha);
            const std::vector<double> fd = finite_diff_oracle_scaled(
                [alpha](std::span<const double> v) { return pool_mixed(v, alpha); }, z, h0);
            dz_row.max_err = std::max(dz_row.max_err, l2_rel_err(analytic.d_input, fd));
            ++dz_row.count;

            const double pre = std::log(alpha / (1.0 - alpha));
            const double fd_alpha = finite_diff_scalar(
                [&z](double pre_a) { return pool_mixed(z, sigmoid(pre_a)); }, pre, h0);
            da_row.max_err = std::max(da_row.max_err,
                                      scalar_rel_err(analytic.d_pre_alpha, fd_alpha));
            ++da_row.count;
        }
        rows.push_back(dz_row);
        rows.push_back(da_row);
    }

    {
        CheckRow dz_row{"gated_input", 0, 0.0};
        CheckRow dw_row{"gated_w", 0, 0.0};
        for (std::size_t k = 0; k < cases; ++k) {
            const std::vector<double> z = gapped_window(rng, len_dist(rng));
            std::vector<double> w(z.size());
            for (double& v : w) v = gate_dist(rng);

            const GatedBackward analytic = gated_backward(z, w);
            const std::vector<double> fd_z = finite_diff_oracle_scaled(
                [&w](std::span<const double> v) { return pool_gated(v, w); }, z, h0);
            dz_row.max_err = std::max(dz_row.max_err, l2_rel_err(analytic.d_input, fd_z));
            ++dz_row.count;

            const std::vector<double> fd_w = finite_diff_oracle_scaled(
                [&z](std::span<const double> v) { return pool_gated(z, v); }, w, h0);
            dw_row.max_err = std::max(dw_row.max_err, l2_rel_err(analytic.d_gate_w, fd_w));
            ++dw_row.count;
        }
        rows.push_back(dz_row);
        rows.push_back(dw_row);
    }

    {
        CheckRow row{"softargmax_xent", 0, 0.0};
        std::uniform_int_distribution<std::size_t> logit_len(2, 10);
        for (std::size_t k = 0; k < cases; ++k) {
            std::vector<double> logits(logit_len(rng));
            for (double& v : logits) v = val(rng);
            std::uniform_int_distribution<std::size_t> target_dist(0, logits.size() - 1);
            const std::size_t target = target_dist(rng);
            const std::vector<double> analytic = softargmax_xent_backward(logits, target);
            const std::vector<double> fd = finite_diff_oracle_scaled(
                [target](std::span<const double> v) {
                    return -std::log(softargmax(v)[target]);
                },
                logits, h0);
            row.max_err = std::max(row.max_err, l2_rel_err(analytic, fd));
            ++row.count;
        }
        rows.push_back(row);
    }

    bool all_pass = true;
    out << "# schema: lae-gradcheck-v1\n";
    out << "check,cases,max_rel_err,tolerance,status\n";
    for (const CheckRow& r : rows) {
        const bool pass = r.max_err <= tolerance;
        all_pass = all_pass && pass;
        out << r.name << ',' << r.count << ',' << csv::fmt(r.max_err) << ','
            << csv::fmt(tolerance) << ',' << (pass ? "pass" : "fail") << '\n';
    }
    return all_pass ? kExitOk : kExitToleranceFailure;
}

int cmd_precision_sweep(const std::vector<double>& t_grid,
                        const std::vector<std::string>& precision_names,
                        const std::string& out_path) {
    try {
        if (t_grid.empty()) {
            std::cerr << "error: --t-grid must not be empty\n";
            return kExitUsage;
        }
        if (precision_names.empty()) {
            std::cerr << "error: --precisions must not be empty\n";
            return kExitUsage;
        }
        std::vector<Precision> precisions;
        for (const auto& name : precision_names) precisions.push_back(parse_precision(name));

        const auto windows = sample_sweep_windows(128, 4, 32, 20240001);
        const std::vector<SweepRow> rows = lae_precision_sweep(windows, t_grid, precisions);
        return write_report(out_path, [&rows](std::ostream& out) {
            out << "# schema: lae-precision-sweep-v1\n";
            out << "t,precision,median_forward_err,max_forward_err,median_input_grad_err,"
                   "max_input_grad_err,median_logt_grad_err,max_logt_grad_err\n";
            for (const SweepRow& r : rows) {
                out << csv::fmt(r.t) << ',' << precision_name(r.precision) << ','
                    << csv::fmt(r.median_forward_err) << ',' << csv::fmt(r.max_forward_err) << ','
                    << csv::fmt(r.median_input_grad_err) << ',' << csv::fmt(r.max_input_grad_err)
                    << ',' << csv::fmt(r.median_logt_grad_err) << ','
                    << csv::fmt(r.max_logt_grad_err) << '\n';
            }
        });
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

int cmd_train(const std::string& pool_kind, double t0, const std::string& mode,
              std::uint64_t seed, const std::string& out_path,
              const std::string& save_model_path) {
    try {
        SyntheticTask task = default_task();
        task.seed = seed;
        SyntheticTask eval_task = task;
        eval_task.seed = seed + 1;
        const std::vector<Sample> train_set = generate_dataset(task, 256);
        const std::vector<Sample> eval_set = generate_dataset(eval_task, 256);

        const Shape in_shape = train_set[0].x.shape();
        const PoolSpec spec =
            make_spec(pool_kind, t0, parse_mode(mode), task.classes, in_shape.window());

        TrainConfig cfg = default_config();
        cfg.seed = seed;
        TinyModel model = make_model(task.classes, spec, seed);
        auto [trained, records] = train(std::move(model), train_set, eval_set, cfg);

        if (!save_model_path.empty()) save_model(trained, save_model_path);

        const std::size_t temp_cols = records.empty() ? 0 : records[0].temperatures.size();
        return write_report(out_path, [&](std::ostream& out) {
            out << "# schema: lae-train-v1\n";
            out << "epoch,train_loss,eval_accuracy";
            for (std::size_t i = 0; i < temp_cols; ++i) out << ",t_" << i;
            out << '\n';
            for (const TrainRecord& r : records) {
                out << r.epoch << ',' << csv::fmt(r.train_loss) << ','
                    << csv::fmt(r.eval_accuracy);
                for (double t : r.temperatures) out << ',' << csv::fmt(t);
                out << '\n';
            }
        });
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitToleranceFailure;
    }
}

int cmd_robustness(const std::string& model_path, const std::string& transform,
                   const std::vector<std::size_t>& sizes, std::uint64_t seed,
                   const std::string& out_path) {
    try {
        if (sizes.empty()) {
            std::cerr << "error: --sizes must not be empty\n";
            return kExitUsage;
        }
        const ResizeTransform tf = parse_transform(transform);

        SyntheticTask task = default_task();
        task.seed = seed;
        SyntheticTask eval_task = task;
        eval_task.seed = seed + 1;
        const std::vector<Sample> eval_set = generate_dataset(eval_task, 256);

        std::vector<TinyModel> models;
        if (model_path.empty()) {
            const std::vector<Sample> train_set = generate_dataset(task, 256);
            TrainConfig cfg = default_config();
            cfg.seed = seed;
            for (const std::string& kind : {std::string("avg"), std::string("lae")}) {
                const PoolSpec spec = make_spec(kind, 4.0, TemperatureMode::shared, task.classes,
                                                train_set[0].x.shape().window());
                auto [trained, records] =
                    train(make_model(task.classes, spec, seed), train_set, eval_set, cfg);
                models.push_back(std::move(trained));
            }
        } else {
            models.push_back(load_model(model_path));
        }

        return write_report(out_path, [&](std::ostream& out) {
            out << "# schema: lae-robustness-v1\n";
            out << "operator,transform,size,accuracy\n";
            for (const TinyModel& model : models) {
                const auto points = evaluate_robustness(model, eval_set, tf, sizes, seed);
                for (const RobustnessPoint& p : points) {
                    out << pool_name(model.pool.kind) << ',' << transform << ',' << p.size << ','
                        << csv::fmt(p.accuracy) << '\n';
                }
            }
        });
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitToleranceFailure;
    }
}

// --- flat weight CSV ----------------------------------------------------------

void save_model(const TinyModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot open '" + path + "' for writing");
    out << "# schema: lae-model-v1\n";
    out << "param,index,value\n";
    out << "classes,0," << model.classes << '\n';
    out << "pool,0," << pool_name(model.pool.kind) << '\n';
    if (model.pool.kind == PoolKind::lae) {
        out << "temp_mode,0," << mode_name(model.pool.temperature.mode()) << '\n';
        const auto log_t = model.pool.temperature.log_t();
        for (std::size_t i = 0; i < log_t.size(); ++i) {
            out << "log_t," << i << ',' << csv::fmt(log_t[i], 17) << '\n';
        }
    }
    for (std::size_t i = 0; i < model.pool.mixed.pre_alpha.size(); ++i) {
        out << "pre_alpha," << i << ',' << csv::fmt(model.pool.mixed.pre_alpha[i], 17) << '\n';
    }
    for (std::size_t i = 0; i < model.pool.gate.w.size(); ++i) {
        out << "gate_w," << i << ',' << csv::fmt(model.pool.gate.w[i], 17) << '\n';
    }
    for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
        out << "conv_w," << i << ',' << csv::fmt(model.conv_w[i], 17) << '\n';
    }
    for (std::size_t i = 0; i < model.bias.size(); ++i) {
        out << "bias," << i << ',' << csv::fmt(model.bias[i], 17) << '\n';
    }
    if (!out) throw std::ios_base::failure("write to '" + path + "' failed");
}

TinyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "' for reading");

    std::size_t classes = 0;
    std::string kind = "avg";
    std::string temp_mode = "fixed";
    std::map<std::size_t, double> log_t, pre_alpha, gate_w, conv_w, bias;

    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) { // param,index,value
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string param, index_str, value_str;
        if (!std::getline(row, param, ',') || !std::getline(row, index_str, ',') ||
            !std::getline(row, value_str)) {
            throw std::ios_base::failure("malformed model row: " + line);
        }
        const std::size_t idx = static_cast<std::size_t>(std::stoull(index_str));
        if (param == "classes") {
            classes = static_cast<std::size_t>(std::stoull(value_str));
        } else if (param == "pool") {
            kind = value_str;
        } else if (param == "temp_mode") {
            temp_mode = value_str;
        } else if (param == "log_t") {
            log_t[idx] = std::stod(value_str);
        } else if (param == "pre_alpha") {
            pre_alpha[idx] = std::stod(value_str);
        } else if (param == "gate_w") {
            gate_w[idx] = std::stod(value_str);
        } else if (param == "conv_w") {
            conv_w[idx] = std::stod(value_str);
        } else if (param == "bias") {
            bias[idx] = std::stod(value_str);
        } else {
            throw std::ios_base::failure("unknown model parameter: " + param);
        }
    }
    if (classes == 0 || conv_w.size() != classes * classes || bias.size() != classes) {
        throw std::ios_base::failure("model file '" + path + "' is incomplete");
    }

    const auto to_vec = [](const std::map<std::size_t, double>& m) {
        std::vector<double> v(m.size());
        for (const auto& [i, val] : m) {
            if (i >= v.size()) throw std::ios_base::failure("model index gap");
            v[i] = val;
        }
        return v;
    };

    TinyModel model;
    model.classes = classes;
    model.conv_w = to_vec(conv_w);
    model.bias = to_vec(bias);
    if (kind == "max") {
        model.pool = PoolSpec::max_pool();
    } else if (kind == "avg") {
        model.pool = PoolSpec::avg_pool();
    } else if (kind == "lse") {
        model.pool = PoolSpec::lse_pool();
    } else if (kind == "lae") {
        const std::vector<double> lt = to_vec(log_t);
        if (lt.empty()) throw std::ios_base::failure("lae model without log_t entries");
        const TemperatureMode mode = parse_mode(temp_mode);
        // Start from t=1 (log_t exactly 0) and shift, so the stored
        // log-temperatures round-trip bit-exactly.
        TemperatureParam temp = TemperatureParam::fixed(1.0);
        switch (mode) {
            case TemperatureMode::fixed: break;
            case TemperatureMode::shared: temp = TemperatureParam::shared(1.0); break;
            case TemperatureMode::per_channel:
                temp = TemperatureParam::per_channel(1.0, lt.size());
                break;
        }
        for (std::size_t i = 0; i < lt.size() && i < temp.size(); ++i) {
            temp.shift_log_t(i, lt[i]);
        }
        model.pool = PoolSpec::lae_pool(temp);
    } else if (kind == "mixed") {
        model.pool = PoolSpec::mixed_pool(MixedParam{to_vec(pre_alpha)});
    } else if (kind == "gated") {
        model.pool = PoolSpec::gated_pool(GateParam{to_vec(gate_w)});
    } else {
        throw std::ios_base::failure("unknown pool kind in model file: " + kind);
    }
    return model;
}

} // namespace lae::cli
