#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pipgan/config.hpp"
#include "pipgan/evaluation.hpp"
#include "pipgan/losses.hpp"
#include "pipgan/pipeline.hpp"

namespace pipgan::cli {

/// One row of the ablation: pipeline order, loss weights and noise.
struct MethodSpec {
    std::string name;
    PipelineOrder order = PipelineOrder::PE;
    LossWeights weights;
    NoiseMode noise = NoiseMode::off;

    /// Directory-safe name.
    std::string slug() const;
};

/// The eight configurations in reporting order.
std::vector<MethodSpec> ablation_specs();

struct AblationRun {
    std::vector<std::pair<std::string, MetricsReport>> reports;
    AblationTable table;
};

/// Trains both stages for every method on the dataset described by `config`,
/// expands each held-out subject's neutral image over the non-neutral pose and
/// expression categories and scores the grid against the ground truth.
/// Per-method artifacts land in `out_dir/<slug>/`.
AblationRun run_synthetic_ablation(const Config& config, const std::filesystem::path& config_dir,
                                   const std::filesystem::path& out_dir);

/// Reads `report.csv` from each run directory; names default to the
/// directory names.
AblationRun ablate_run_dirs(const std::vector<std::filesystem::path>& run_dirs, std::vector<std::string> names);

void write_ablation(const AblationTable& table, const std::filesystem::path& out_dir);

}  // namespace pipgan::cli
