#pragma once

#include <filesystem>
#include <vector>

#include "cli.hpp"
#include "pipgan/pipeline.hpp"

namespace pipgan::cli {

struct StageRun {
    std::filesystem::path checkpoint;
    long steps = 0;
    std::vector<ManifestRow> train_rows;
    std::vector<ManifestRow> test_rows;
};

/// Loads the dataset named by `config`, splits it by subject
/// (`data.train_ratio`, default 0.8; 1 keeps every subject for training),
/// pairs records for `attribute`, trains and writes into `out_dir`:
/// `checkpoint/`, `train_log.csv`, `resolved_config.toml`, `run_meta.json`.
///
/// With `stage.input_checkpoint` set, each record's input is replaced by that
/// stage-1 model's output for the subject's neutral image at the record's
/// value of the other attribute.
StageRun train_stage_from_config(const Config& config, const std::filesystem::path& config_dir, Attribute attribute,
                                 const std::filesystem::path& out_dir);

/// Replaces inputs with stage-1 outputs (see above).
void substitute_stage1_inputs(std::vector<SampleRecord>& records, const std::vector<ManifestRow>& rows,
                              const DatasetInfo& dataset, const StageModel& stage1);

}  // namespace pipgan::cli
