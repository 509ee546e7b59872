#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lae/pooling.hpp"
#include "lae/trainer.hpp"

namespace lae::cli {

/// Exit-code contract shared by every command:
/// 0 success, 1 assertion/tolerance failure, 2 usage error, 3 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitToleranceFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// The 2x2 example matrix with all pooled values and gradient panels.
int cmd_fig1(std::ostream& out);

/// Oracle-agreement suite over every backward operator. Nonzero exit if
/// any case exceeds the tolerance.
int cmd_gradcheck(std::uint64_t seed, std::size_t cases, double tolerance, std::ostream& out);

/// Underflow diagnostic CSV: one row per (t, precision) cell.
int cmd_precision_sweep(const std::vector<double>& t_grid,
                        const std::vector<std::string>& precision_names,
                        const std::string& out_path);

/// Trains on the default synthetic task and writes per-epoch records.
int cmd_train(const std::string& pool_kind, double t0, const std::string& mode,
              std::uint64_t seed, const std::string& out_path,
              const std::string& save_model_path);

/// Accuracy-vs-size curves. With an empty model path, retrains the
/// avg and LAE reference models and emits one curve per operator.
int cmd_robustness(const std::string& model_path, const std::string& transform,
                   const std::vector<std::size_t>& sizes, std::uint64_t seed,
                   const std::string& out_path);

// --- flat weight CSV ----------------------------------------------------------

void save_model(const TinyModel& model, const std::string& path);
TinyModel load_model(const std::string& path);

/// Maps an output path to a stream: "-" means stdout. Throws
/// std::ios_base::failure if the file cannot be opened.
int write_report(const std::string& out_path, const std::function<void(std::ostream&)>& body);

} // namespace lae::cli
