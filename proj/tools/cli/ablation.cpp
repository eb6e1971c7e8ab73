#include "ablation.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <tuple>
#include <map>

#include "cli.hpp"
#include "pipgan/image_io.hpp"
#include "pipgan/logging.hpp"
#include "stage_runner.hpp"

namespace pipgan::cli {
namespace fs = std::filesystem;

std::string MethodSpec::slug() const {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!out.empty() && out.back() != '_') {
            out += '_';
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::vector<MethodSpec> ablation_specs() {
    // (adversarial, cascade, gp, classification, l1)
    auto w = [](double a, double c, double g, double p, double l) { return LossWeights{a, c, g, p, l}; };
    const auto& names = ablation_methods();
    return {
        {names[0], PipelineOrder::PE, w(1, 1, 1, 10, 50), NoiseMode::off},
        {names[1], PipelineOrder::PE, w(1, 1, 1, 0, 50), NoiseMode::off},
        {names[2], PipelineOrder::PE, w(1, 1, 0, 0, 50), NoiseMode::off},
        {names[3], PipelineOrder::PE, w(1, 0, 1, 0, 50), NoiseMode::off},
        {names[4], PipelineOrder::PE, w(1, 0, 0, 0, 50), NoiseMode::off},
        {names[5], PipelineOrder::EP, w(1, 0, 1, 0, 50), NoiseMode::off},
        {names[6], PipelineOrder::EP, w(1, 0, 0, 0, 50), NoiseMode::off},
        // Adversarial + L1 with weight 100 and dropout noise.
        {names[7], PipelineOrder::PE, w(1, 0, 0, 0, 100), NoiseMode::dropout},
    };
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Config method_config(const Config& base, const MethodSpec& method) {
    auto c = base;
    c.set("loss.xi1", num(method.weights.adversarial));
    c.set("loss.xi2", num(method.weights.cascade));
    c.set("loss.xi3", num(method.weights.gradient_penalty));
    c.set("loss.xi4", num(method.weights.classification));
    c.set("loss.xi5", num(method.weights.l1));
    c.set("model.noise_mode", to_string(method.noise));
    c.set("pipeline.order", to_string(method.order));
    return c;
}

Config stage_config(const Config& method, Attribute attribute, PipelineOrder order) {
    auto c = method;
    const bool first = (attribute == Attribute::pose) == (order == PipelineOrder::PE);
    c.set("stage.pairing", first ? "neutral" : "all");
    return c;
}

}  // namespace

AblationRun run_synthetic_ablation(const Config& base, const fs::path& base_dir, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    auto config = base;
    auto config_dir = base_dir;
    if (!config.contains("data.manifest")) {
        SynthSpec spec;
        spec.n_subjects = static_cast<int>(config.get_int("synth.subjects", 8));
        spec.k_pose = static_cast<int>(config.get_int("synth.poses", 5));
        spec.k_expr = static_cast<int>(config.get_int("synth.exprs", 7));
        spec.image_size = static_cast<int>(config.get_int("synth.size", 32));
        spec.seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
        const auto data_dir = fs::absolute(out_dir / "data");
        synth_generate(spec, data_dir);
        auto dataset = Config::load(data_dir / "dataset.toml");
        for (const auto& [key, value] : dataset.entries()) {
            if (!config.contains(key)) config.set(key, value);
        }
        config_dir = data_dir;
    }
    if (!config.contains("train.max_steps")) config.set("train.max_steps", "200");
    const auto dataset = dataset_info(config, config_dir);
    const auto rows = load_manifest(dataset.manifest, dataset.pose_schema, dataset.expr_schema);

    std::vector<int> pose_set, expr_set;
    for (int p = 0; p < dataset.pose_schema.size(); ++p) {
        if (p != dataset.pose_schema.neutral_index) pose_set.push_back(p);
    }
    for (int e = 0; e < dataset.expr_schema.size(); ++e) {
        if (e != dataset.expr_schema.neutral_index) expr_set.push_back(e);
    }

    AblationRun run;
    for (const auto& method : ablation_specs()) {
        log_info("ablation: training " + method.name);
        const auto dir = out_dir / method.slug();
        const auto mc = method_config(config, method);
        auto pose_run = train_stage_from_config(stage_config(mc, Attribute::pose, method.order), config_dir,
                                                Attribute::pose, dir / "pose");
        auto expr_run = train_stage_from_config(stage_config(mc, Attribute::expression, method.order), config_dir,
                                                Attribute::expression, dir / "expression");
        auto model = compose(load_stage(pose_run.checkpoint, Attribute::pose),
                             load_stage(expr_run.checkpoint, Attribute::expression), method.order);

        const auto& eval_rows = pose_run.test_rows.empty() ? pose_run.train_rows : pose_run.test_rows;
        std::map<std::tuple<std::string, int, int>, const ManifestRow*> index;
        for (const auto& row : eval_rows) index[{row.subject_id, row.pose, row.expression}] = &row;

        std::vector<std::string> pair_ids;
        auto rng = make_generator(static_cast<std::uint64_t>(config.get_int("seed", 0)));
        for (const auto& subject : subject_ids(eval_rows)) {
            auto source = index.find({subject, dataset.pose_schema.neutral_index, dataset.expr_schema.neutral_index});
            if (source == index.end()) throw MissingSource("subject " + subject + " has no neutral image");
            auto grid = model.expand(load_image(source->second->path, dataset.image_size), pose_set, expr_set, rng);
            auto written = write_grid(grid, subject, dataset.pose_schema, dataset.expr_schema, dir / "generated");
            for (const auto& cell : grid.outputs) {
                auto target = index.find({subject, cell.pose, cell.expression});
                if (target == index.end()) continue;
                const auto name = subject + "_" + dataset.pose_schema.categories[cell.pose] + "_" +
                                  dataset.expr_schema.categories[cell.expression] + ".png";
                save_png(load_image(target->second->path, dataset.image_size), dir / "targets" / name);
                pair_ids.push_back(name);
            }
        }
        auto report = evaluate_pairs(dir / "generated", dir / "targets", pair_ids);
        write_report_csv(report, dir / "report.csv");
        run.reports.emplace_back(method.name, std::move(report));
    }
    run.table = ablation_report(run.reports);
    return run;
}

AblationRun ablate_run_dirs(const std::vector<fs::path>& run_dirs, std::vector<std::string> names) {
    if (run_dirs.empty()) throw UsageError("no run directories given");
    if (!names.empty() && names.size() != run_dirs.size()) {
        throw UsageError("--names has " + std::to_string(names.size()) + " entries for " +
                         std::to_string(run_dirs.size()) + " runs");
    }
    AblationRun run;
    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
        const auto name = names.empty() ? fs::absolute(run_dirs[i]).lexically_normal().filename().string() : names[i];
        run.reports.emplace_back(name, read_report_csv(run_dirs[i] / "report.csv"));
    }
    run.table = ablation_report(run.reports);
    return run;
}

void write_ablation(const AblationTable& table, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "ablation.csv", std::ios::binary) << table.csv;
    std::ofstream(out_dir / "ablation.md", std::ios::binary) << table.markdown;
    std::ofstream(out_dir / "ablation.txt", std::ios::binary) << table.text;
}

}  // namespace pipgan::cli
