#include "stage_runner.hpp"

#include <fstream>
#include <map>

#include "pipgan/image_io.hpp"
#include "pipgan/training.hpp"

namespace pipgan::cli {
namespace fs = std::filesystem;

void substitute_stage1_inputs(std::vector<SampleRecord>& records, const std::vector<ManifestRow>& rows,
                              const DatasetInfo& dataset, const StageModel& stage1) {
    std::map<std::string, const ManifestRow*> neutral;
    for (const auto& row : rows) {
        if (row.pose == dataset.pose_schema.neutral_index && row.expression == dataset.expr_schema.neutral_index) {
            neutral[row.subject_id] = &row;
        }
    }
    std::map<std::string, Image> source_cache;
    for (auto& record : records) {
        auto it = neutral.find(record.subject_id);
        if (it == neutral.end()) throw MissingSource("subject " + record.subject_id + " has no neutral image");
        auto cached = source_cache.find(record.subject_id);
        if (cached == source_cache.end()) {
            cached = source_cache.emplace(record.subject_id, load_image(it->second->path, dataset.image_size)).first;
        }
        record.input = stage1.apply(cached->second, record.other_index, std::nullopt, true);
    }
}

StageRun train_stage_from_config(const Config& base, const fs::path& config_dir, Attribute attribute,
                                 const fs::path& out_dir) {
    auto config = base;
    const auto dataset = dataset_info(config, config_dir);
    const auto& schema = attribute == Attribute::pose ? dataset.pose_schema : dataset.expr_schema;
    config.set("stage.attribute", to_string(attribute));
    if (!config.contains("stage.name")) config.set("stage.name", to_string(attribute));
    std::string categories;
    for (const auto& c : schema.categories) categories += (categories.empty() ? "" : ",") + c;
    config.set("stage.categories", categories);
    config.set("stage.neutral", std::to_string(schema.neutral_index));
    config.set("model.image_size", std::to_string(dataset.image_size));

    StageRun run;
    const auto rows = load_manifest(dataset.manifest, dataset.pose_schema, dataset.expr_schema);
    const double ratio = config.get_double("data.train_ratio", 0.8);
    const auto seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
    if (ratio >= 1.0) {
        run.train_rows = rows;
    } else {
        std::tie(run.train_rows, run.test_rows) = split_subjects(rows, ratio, seed);
    }

    const auto spec = stage_spec(config, attribute, dataset);
    auto train = pair_for_stage(run.train_rows, dataset.pose_schema, dataset.expr_schema, spec, dataset.image_size);
    auto eval = run.test_rows.empty()
                    ? std::vector<SampleRecord>{}
                    : pair_for_stage(run.test_rows, dataset.pose_schema, dataset.expr_schema, spec, dataset.image_size);
    if (auto stage1 = config.get("stage.input_checkpoint"); stage1 && !stage1->empty()) {
        const auto other = attribute == Attribute::pose ? Attribute::expression : Attribute::pose;
        auto model = load_stage(*stage1, other);
        substitute_stage1_inputs(train, run.train_rows, dataset, model);
        substitute_stage1_inputs(eval, run.test_rows, dataset, model);
    }

    const auto train_config = TrainConfig::from_config(config);
    fs::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.csv", std::ios::binary);
    log << loss_log_header() << '\n';
    auto result = train_stage(train_config, train, eval, [&](const LossRecord& r) { log << format_loss_row(r) << '\n'; });
    log.flush();

    run.checkpoint = out_dir / "checkpoint";
    save_checkpoint(result.state, make_meta(result.state, result.history), run.checkpoint);
    run.steps = result.state.step;
    write_run_metadata(config, "train", out_dir);
    return run;
}

}  // namespace pipgan::cli
