#include "lae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "lae/grad.hpp"

namespace lae {

std::vector<Sample> generate_dataset(const SyntheticTask& task, std::size_t n) {
    if (task.classes == 0) throw std::invalid_argument("generate_dataset: zero classes");
    if (task.grid_height == 0 || task.grid_width == 0) {
        throw std::invalid_argument("generate_dataset: zero-size grid");
    }
    if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");

    const Shape shape{1, task.classes, task.grid_height, task.grid_width};
    const std::size_t win = shape.window();
    std::mt19937_64 rng(task.seed);
    std::uniform_int_distribution<std::size_t> label_dist(0, task.classes - 1);
    std::normal_distribution<double> noise(0.0, task.noise_std > 0.0 ? task.noise_std : 1.0);
    std::uniform_int_distribution<std::size_t> site_dist(0, win - 1);
    std::uniform_int_distribution<std::size_t> extra_sites(0, 2);

    std::vector<Sample> out;
    out.reserve(n);
    std::vector<std::size_t> positions(win);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t label = label_dist(rng);
        std::vector<double> values(shape.volume(), 0.0);
        if (task.noise_std > 0.0) {
            for (double& v : values) v = noise(rng);
        }
        std::size_t site_count = 1;
        if (task.placement == Placement::multi_site) {
            site_count = std::min(win, 1 + extra_sites(rng));
        }
        // Distinct sites via a partial shuffle.
        std::iota(positions.begin(), positions.end(), std::size_t{0});
        for (std::size_t k = 0; k < site_count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, win - 1);
            std::swap(positions[k], positions[pick(rng)]);
            values[label * win + positions[k]] += task.signal_strength;
        }
        out.push_back(Sample{Tensor(shape, std::move(values)), label});
    }
    return out;
}

TinyModel make_model(std::size_t classes, PoolSpec pool, std::uint64_t seed) {
    if (classes == 0) throw std::invalid_argument("make_model: zero classes");
    TinyModel m;
    m.classes = classes;
    m.conv_w.resize(classes * classes);
    m.bias.assign(classes, 0.0);
    m.pool = std::move(pool);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, 0.3);
    for (double& w : m.conv_w) w = init(rng);
    return m;
}

namespace {

/// 1x1 conv over a batch of samples: stacks per-class feature windows
/// into one (B, C, H, W) tensor.
Tensor batch_features(const TinyModel& model, const std::vector<Sample>& data,
                      std::span<const std::size_t> indices) {
    const Shape in_shape = data[indices[0]].x.shape();
    const std::size_t C = model.classes;
    const std::size_t win = in_shape.window();
    const Shape shape{indices.size(), C, in_shape.height, in_shape.width};
    std::vector<double> values(shape.volume());
    for (std::size_t bi = 0; bi < indices.size(); ++bi) {
        const std::span<const double> x = data[indices[bi]].x.data();
        for (std::size_t c = 0; c < C; ++c) {
            double* f = values.data() + (bi * C + c) * win;
            for (std::size_t s = 0; s < win; ++s) {
                double acc = 0.0;
                for (std::size_t j = 0; j < C; ++j) {
                    acc += model.conv_w[c * C + j] * x[j * win + s];
                }
                f[s] = acc;
            }
        }
    }
    return Tensor(shape, std::move(values));
}

std::size_t argmax_first(std::span<const double> v) {
    return static_cast<std::size_t>(
        std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

std::vector<double> temperature_snapshot(const PoolSpec& spec) {
    std::vector<double> temps;
    if (spec.kind == PoolKind::lae) {
        for (double lt : spec.temperature.log_t()) temps.push_back(std::exp(lt));
    }
    return temps;
}

} // namespace

std::vector<double> model_logits(const TinyModel& model, const Sample& sample) {
    const Shape in = sample.x.shape();
    const std::size_t C = model.classes;
    const std::size_t win = in.window();
    const std::span<const double> x = sample.x.data();
    std::vector<double> values(C * win);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t s = 0; s < win; ++s) {
            double acc = 0.0;
            for (std::size_t j = 0; j < C; ++j) acc += model.conv_w[c * C + j] * x[j * win + s];
            values[c * win + s] = acc;
        }
    }
    const Tensor features({1, C, in.height, in.width}, std::move(values));
    const Tensor pooled = global_pool_serial(features, model.pool);
    std::vector<double> y(pooled.data().begin(), pooled.data().end());
    for (std::size_t c = 0; c < C; ++c) y[c] += model.bias[c];
    return y;
}

double evaluate_accuracy(const TinyModel& model, const std::vector<Sample>& data) {
    if (data.empty()) throw std::invalid_argument("evaluate_accuracy: empty data");
    std::size_t correct = 0;
    for (const Sample& s : data) {
        if (argmax_first(model_logits(model, s)) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_loss(const TinyModel& model, const std::vector<Sample>& data) {
    if (data.empty()) throw std::invalid_argument("evaluate_loss: empty data");
    double total = 0.0;
    for (const Sample& s : data) {
        const std::vector<double> y = model_logits(model, s);
        const std::vector<double> p = softargmax(y);
        total += -std::log(p[s.label]);
    }
    return total / static_cast<double>(data.size());
}

std::pair<TinyModel, std::vector<TrainRecord>> train(TinyModel model,
                                                     const std::vector<Sample>& train_set,
                                                     const std::vector<Sample>& eval_set,
                                                     const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    const std::size_t C = model.classes;
    const std::size_t win = train_set[0].x.shape().window();
    const double pool_lr = cfg.learning_rate * cfg.temp_lr_multiplier;

    std::vector<TrainRecord> records;
    records.reserve(cfg.epochs);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);
            const double bsize = static_cast<double>(batch.size());

            const Tensor features = batch_features(model, train_set, batch);
            const Tensor pooled = global_pool_serial(features, model.pool);

            // Per-sample loss and upstream gradient, already divided by
            // the batch size so the backward pass emits mean gradients.
            double batch_loss = 0.0;
            std::vector<double> upstream(batch.size() * C);
            std::vector<double> d_bias(C, 0.0);
            std::vector<double> y(C);
            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                for (std::size_t c = 0; c < C; ++c) {
                    y[c] = pooled.data()[bi * C + c] + model.bias[c];
                }
                const std::size_t label = train_set[batch[bi]].label;
                const std::vector<double> p = softargmax(y);
                batch_loss += -std::log(p[label]);
                const std::vector<double> gy = softargmax_xent_backward(y, label);
                for (std::size_t c = 0; c < C; ++c) {
                    upstream[bi * C + c] = gy[c] / bsize;
                    d_bias[c] += gy[c] / bsize;
                }
            }
            batch_loss /= bsize;
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: non-finite loss in epoch " +
                                         std::to_string(epoch) + " batch " +
                                         std::to_string(batch_index));
            }
            epoch_loss += batch_loss * bsize;

            const PoolGradients pg = global_pool_backward_serial(
                features, model.pool,
                Tensor({batch.size(), C, 1, 1}, std::move(upstream)));

            // dW[c][j] = sum over samples and sites of d_feature * x_j.
            std::vector<double> d_w(C * C, 0.0);
            const std::span<const double> din = pg.d_input.data();
            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                const std::span<const double> x = train_set[batch[bi]].x.data();
                for (std::size_t c = 0; c < C; ++c) {
                    const double* df = din.data() + (bi * C + c) * win;
                    for (std::size_t j = 0; j < C; ++j) {
                        double acc = 0.0;
                        for (std::size_t s = 0; s < win; ++s) acc += df[s] * x[j * win + s];
                        d_w[c * C + j] += acc;
                    }
                }
            }

            // Decoupled weight decay on model weights only; pooling
            // parameters are excluded and use their own learning rate.
            for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
                model.conv_w[i] -= cfg.learning_rate * d_w[i] + cfg.weight_decay * model.conv_w[i];
            }
            for (std::size_t c = 0; c < C; ++c) {
                model.bias[c] -= cfg.learning_rate * d_bias[c] + cfg.weight_decay * model.bias[c];
            }
            if (model.pool.kind == PoolKind::lae) {
                for (std::size_t i = 0; i < pg.d_log_t.size(); ++i) {
                    model.pool.temperature.shift_log_t(i, -pool_lr * pg.d_log_t[i]);
                }
            } else if (model.pool.kind == PoolKind::mixed) {
                for (std::size_t i = 0; i < pg.d_pre_alpha.size(); ++i) {
                    model.pool.mixed.pre_alpha[i] -= pool_lr * pg.d_pre_alpha[i];
                }
            } else if (model.pool.kind == PoolKind::gated) {
                for (std::size_t i = 0; i < pg.d_gate_w.size(); ++i) {
                    model.pool.gate.w[i] -= pool_lr * pg.d_gate_w[i];
                }
            }
        }

        TrainRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
        rec.eval_accuracy = eval_set.empty() ? 0.0 : evaluate_accuracy(model, eval_set);
        rec.temperatures = temperature_snapshot(model.pool);
        records.push_back(std::move(rec));
    }
    return {std::move(model), std::move(records)};
}

Sample transform_sample(const Sample& sample, std::size_t size, ResizeTransform transform,
                        std::uint64_t seed) {
    if (size == 0) throw std::invalid_argument("transform_sample: size must be >= 1");
    const Shape in = sample.x.shape();
    const Shape out_shape{in.batch, in.channels, size, size};
    std::vector<double> out(out_shape.volume(), 0.0);
    const std::span<const double> x = sample.x.data();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> standard_normal(0.0, 1.0);

    for (std::size_t b = 0; b < in.batch; ++b) {
        for (std::size_t c = 0; c < in.channels; ++c) {
            const double* src = x.data() + (b * in.channels + c) * in.window();
            double* dst = out.data() + (b * in.channels + c) * size * size;
            if (transform == ResizeTransform::zoom) {
                for (std::size_t h = 0; h < size; ++h) {
                    const std::size_t sh = h * in.height / size;
                    for (std::size_t w = 0; w < size; ++w) {
                        const std::size_t sw = w * in.width / size;
                        dst[h * size + w] = src[sh * in.width + sw];
                    }
                }
            } else {
                for (std::size_t h = 0; h < size; ++h) {
                    for (std::size_t w = 0; w < size; ++w) {
                        double v;
                        if (size <= in.height) {
                            // center crop (assumes square grids for the
                            // height/width offset pairing)
                            const std::size_t oh = (in.height - size) / 2;
                            const std::size_t ow = (in.width - size) / 2;
                            v = src[(h + oh) * in.width + (w + ow)];
                        } else {
                            const std::size_t oh = (size - in.height) / 2;
                            const std::size_t ow = (size - in.width) / 2;
                            const bool inside = h >= oh && h < oh + in.height && w >= ow &&
                                                w < ow + in.width;
                            if (inside) {
                                v = src[(h - oh) * in.width + (w - ow)];
                            } else if (transform == ResizeTransform::crop_or_pad_normal) {
                                v = standard_normal(rng);
                            } else {
                                v = 0.0;
                            }
                        }
                        dst[h * size + w] = v;
                    }
                }
            }
        }
    }
    return Sample{Tensor(out_shape, std::move(out), sample.x.precision()), sample.label};
}

std::vector<RobustnessPoint> evaluate_robustness(const TinyModel& model,
                                                 const std::vector<Sample>& data,
                                                 ResizeTransform transform,
                                                 std::span<const std::size_t> sizes,
                                                 std::uint64_t seed) {
    if (sizes.empty()) throw std::invalid_argument("evaluate_robustness: empty size list");
    if (model.pool.kind == PoolKind::gated) {
        throw std::invalid_argument(
            "evaluate_robustness: gated pooling is fixed-size and cannot adapt to resized input");
    }
    if (data.empty()) throw std::invalid_argument("evaluate_robustness: empty data");

    std::vector<RobustnessPoint> points;
    points.reserve(sizes.size());
    for (std::size_t size : sizes) {
        if (size == 0) throw std::invalid_argument("evaluate_robustness: size must be >= 1");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Sample resized =
                transform_sample(data[i], size, transform,
                                 seed ^ (size * 0x9E3779B97F4A7C15ULL) ^ i);
            if (argmax_first(model_logits(model, resized)) == resized.label) ++correct;
        }
        points.push_back({size, static_cast<double>(correct) / static_cast<double>(data.size())});
    }
    return points;
}

std::vector<TrajectoryRow> temperature_trajectory_study(const SyntheticTask& task,
                                                        const TrainConfig& cfg,
                                                        TemperatureMode mode,
                                                        std::span<const double> t0_grid,
                                                        std::size_t repeats) {
    if (mode == TemperatureMode::fixed) {
        throw std::invalid_argument(
            "temperature_trajectory_study: fixed temperature has nothing to train");
    }
    if (t0_grid.empty()) throw std::invalid_argument("temperature_trajectory_study: empty t0 grid");
    if (repeats == 0) throw std::invalid_argument("temperature_trajectory_study: repeats must be >= 1");

    const std::vector<Sample> train_set = generate_dataset(task, 256);
    SyntheticTask eval_task = task;
    eval_task.seed = task.seed + 1;
    const std::vector<Sample> eval_set = generate_dataset(eval_task, 128);

    const std::int64_t cells = static_cast<std::int64_t>(t0_grid.size() * repeats);
    std::vector<TrajectoryRow> rows(static_cast<std::size_t>(cells));

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        const std::size_t gi = static_cast<std::size_t>(cell) / repeats;
        const std::size_t rep = static_cast<std::size_t>(cell) % repeats;
        const double t0 = t0_grid[gi];
        TemperatureParam temp = mode == TemperatureMode::shared
                                    ? TemperatureParam::shared(t0)
                                    : TemperatureParam::per_channel(t0, task.classes);
        TrainConfig cell_cfg = cfg;
        cell_cfg.seed = cfg.seed + rep;
        TinyModel model = make_model(task.classes, PoolSpec::lae_pool(temp), cell_cfg.seed);
        auto [trained, records] = train(std::move(model), train_set, eval_set, cell_cfg);
        TrajectoryRow& row = rows[static_cast<std::size_t>(cell)];
        row.t0 = t0;
        row.repeat = rep;
        row.final_temperatures = temperature_snapshot(trained.pool);
    }
    return rows;
}

SyntheticTask default_task() {
    return SyntheticTask{};
}

TrainConfig default_config() {
    return TrainConfig{};
}

} // namespace lae
