#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bprg/trajectory.hpp"

namespace bprg {

inline constexpr std::string_view kTrajectoryCsvHeader =
    "phase,step,sparsity,train_loss,test_accuracy,active_params,elapsed_ms";

// One row per record, reals with six decimals, '\n' line endings.
std::string trajectory_csv(const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> parse_trajectory_csv(std::string_view text);

// Throws UsageError for an empty record list.
void emit_trajectory_csv(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path);
std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path);

// 800x600 accuracy-vs-sparsity plot: one polyline per phase, circle markers
// for pretrain, squares for prune, triangles for regrow. Needs >= 2 records.
std::string trajectory_svg(const std::vector<TrajectoryRecord>& records);
void emit_plot_svg(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path);

}  // namespace bprg
