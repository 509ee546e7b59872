#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lae/pooling.hpp"
#include "lae/tensor.hpp"

namespace lae {

enum class Placement { single_site, multi_site };

/// "Feature anywhere in space" classification task: each sample carries
/// one true class whose signal is planted at one or more spatial sites
/// of the matching channel; everything else is noise. The or-like
/// structure makes the pooling operator the decisive model component.
struct SyntheticTask {
    std::size_t classes = 4;
    std::size_t grid_height = 6;
    std::size_t grid_width = 6;
    double signal_strength = 4.0;
    double noise_std = 1.0;
    Placement placement = Placement::single_site;
    std::uint64_t seed = 0;
};

struct Sample {
    Tensor x; // (1, classes, H, W)
    std::size_t label = 0;
};

/// Deterministic given the task seed. Throws for zero classes or a
/// zero-size grid.
std::vector<Sample> generate_dataset(const SyntheticTask& task, std::size_t n);

/// Conv(1x1, classes -> classes) -> global pool -> per-class bias ->
/// softargmax cross-entropy.
struct TinyModel {
    std::size_t classes = 0;
    std::vector<double> conv_w; // classes x classes, row-major
    std::vector<double> bias;   // per class
    PoolSpec pool;
};

TinyModel make_model(std::size_t classes, PoolSpec pool, std::uint64_t seed);

struct TrainConfig {
    double learning_rate = 1.0;
    double temp_lr_multiplier = 1.0;
    double weight_decay = 0.0; // decoupled per-update decay on model weights
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
};

struct TrainRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double eval_accuracy = 0.0;
    std::vector<double> temperatures; // exp(log_t) snapshot, LAE only
};

/// Plain SGD, single-threaded and deterministic given the config seed.
/// Weight decay acts on conv weights and biases only; pooling
/// parameters (log_t, pre_alpha, gate w) are excluded and updated with
/// learning_rate * temp_lr_multiplier. Throws std::runtime_error naming
/// the offending batch if the loss goes non-finite.
std::pair<TinyModel, std::vector<TrainRecord>> train(TinyModel model,
                                                     const std::vector<Sample>& train_set,
                                                     const std::vector<Sample>& eval_set,
                                                     const TrainConfig& cfg);

/// Class logits for one sample under the current model.
std::vector<double> model_logits(const TinyModel& model, const Sample& sample);

double evaluate_accuracy(const TinyModel& model, const std::vector<Sample>& data);

/// Mean cross-entropy loss without updating anything.
double evaluate_loss(const TinyModel& model, const std::vector<Sample>& data);

enum class ResizeTransform { zoom, crop_or_pad_zero, crop_or_pad_normal };

/// Spatially resizes one sample: nearest-neighbor zoom, or center
/// crop / pad with zeros or standard-normal draws. At the original size
/// every transform is the identity.
Sample transform_sample(const Sample& sample, std::size_t size, ResizeTransform transform,
                        std::uint64_t seed);

struct RobustnessPoint {
    std::size_t size = 0;
    double accuracy = 0.0;
};

/// Accuracy after resizing every input to each target size. The pooling
/// window follows the transformed size, so only size-adaptive specs are
/// allowed (gated is an error). Throws for an empty size list or size 0.
std::vector<RobustnessPoint> evaluate_robustness(const TinyModel& model,
                                                 const std::vector<Sample>& data,
                                                 ResizeTransform transform,
                                                 std::span<const std::size_t> sizes,
                                                 std::uint64_t seed);

struct TrajectoryRow {
    double t0 = 0.0;
    std::size_t repeat = 0;
    std::vector<double> final_temperatures;
};

/// Trains one model per (t0, repeat) cell and records the final
/// exp(log_t) values. Cells are independent and run in parallel; rows
/// come back in grid order. Rejects the fixed temperature mode.
std::vector<TrajectoryRow> temperature_trajectory_study(const SyntheticTask& task,
                                                        const TrainConfig& cfg,
                                                        TemperatureMode mode,
                                                        std::span<const double> t0_grid,
                                                        std::size_t repeats);

/// The canonical desk-scale setup shared by the CLI and the acceptance
/// suite.
SyntheticTask default_task();
TrainConfig default_config();

} // namespace lae
