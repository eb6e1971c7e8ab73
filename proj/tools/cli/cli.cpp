#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ablation.hpp"
#include "pipgan/evaluation.hpp"
#include "pipgan/image_io.hpp"
#include "pipgan/logging.hpp"
#include "pipgan/pipeline.hpp"
#include "pipgan/training.hpp"
#include "stage_runner.hpp"

namespace pipgan::cli {
namespace fs = std::filesystem;

DatasetInfo dataset_info(const Config& config, const fs::path& config_dir) {
    DatasetInfo info;
    auto manifest = config.get("data.manifest");
    if (!manifest) throw UsageError("no dataset: set data.manifest (e.g. --config <dataset>/dataset.toml)");
    info.manifest = fs::path(*manifest);
    if (info.manifest.is_relative()) info.manifest = config_dir / info.manifest;

    auto schema = [&](const std::string& key, AttributeSchema fallback) {
        auto categories = config.get_list("schema." + key);
        if (categories.empty()) return fallback;
        AttributeSchema s{key, categories, static_cast<int>(config.get_int("schema." + key + "_neutral", 0))};
        s.validate();
        return s;
    };
    info.pose_schema = schema("pose", AttributeSchema::kdef_pose());
    info.expr_schema = schema("expression", AttributeSchema::kdef_expression());
    info.image_size = static_cast<int>(config.get_int("model.image_size", config.get_int("data.image_size", 64)));
    return info;
}

StageSpec stage_spec(const Config& config, Attribute attribute, const DatasetInfo& dataset) {
    StageSpec spec;
    spec.varying = attribute;
    spec.include_identity = config.get_bool("stage.include_identity", false);
    const auto default_pairing = attribute == Attribute::pose ? "neutral" : "all";
    const auto pairing = config.get_string("stage.pairing", default_pairing);
    if (pairing == "neutral") {
        spec.fixed_other = attribute == Attribute::pose ? dataset.expr_schema.neutral_index
                                                        : dataset.pose_schema.neutral_index;
    } else if (pairing != "all") {
        throw UsageError("stage.pairing must be 'neutral' or 'all', got '" + pairing + "'");
    }
    return spec;
}

void apply_environment(Config& config) {
    if (const char* weights = std::getenv("PIPGAN_CASCADE_WEIGHTS"); weights && *weights) {
        config.set("cascade.weights_path", weights);
    }
}

void write_run_metadata(const Config& config, const std::string& command, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    config.save(out_dir / "resolved_config.toml");
    nlohmann::json j = {{"command", command},
                        {"config_hash", config.hash()},
                        {"seed", config.get_int("seed", 0)}};
    std::ofstream out(out_dir / "run_meta.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

namespace {

std::vector<int> pick_targets(const AttributeSchema& schema, int count, const std::vector<std::string>& names) {
    std::vector<int> targets;
    if (!names.empty()) {
        for (const auto& n : names) targets.push_back(schema.index_of(n));
        return targets;
    }
    if (count < 1) throw UsageError("need at least one " + schema.name + " target");
    if (count >= schema.size()) {
        if (count > schema.size()) {
            throw UsageError("asked for " + std::to_string(count) + " " + schema.name + " targets, schema has " +
                             std::to_string(schema.size()));
        }
        for (int i = 0; i < schema.size(); ++i) targets.push_back(i);
        return targets;
    }
    for (int i = 0; i < schema.size() && static_cast<int>(targets.size()) < count; ++i) {
        if (i != schema.neutral_index) targets.push_back(i);
    }
    return targets;
}

struct Globals {
    std::string config_path;
    std::optional<std::int64_t> seed;
    std::string out;
};

Config load_config(const Globals& g, fs::path& config_dir) {
    Config config;
    config_dir = fs::current_path();
    if (!g.config_path.empty()) {
        config = Config::load(g.config_path);
        config_dir = fs::absolute(g.config_path).parent_path();
    }
    apply_environment(config);
    const auto seed = g.seed.value_or(config.get_int("seed", 0));
    config.set("seed", std::to_string(seed));
    config.set("train.seed", std::to_string(seed));
    return config;
}

int cmd_synth(const Globals& g, const SynthSpec& flags) {
    fs::path config_dir;
    auto config = load_config(g, config_dir);
    SynthSpec spec = flags;
    spec.seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
    const fs::path out = g.out.empty() ? fs::path("synth") : fs::path(g.out);
    auto manifest = synth_generate(spec, out);
    config.set("synth.subjects", std::to_string(spec.n_subjects));
    config.set("synth.poses", std::to_string(spec.k_pose));
    config.set("synth.exprs", std::to_string(spec.k_expr));
    config.set("synth.size", std::to_string(spec.image_size));
    write_run_metadata(config, "synth-data", out);
    std::cout << "wrote " << spec.n_subjects * spec.k_pose * spec.k_expr << " images and " << manifest.string()
              << '\n';
    return kExitOk;
}

int cmd_train(const Globals& g, const std::string& stage, std::optional<long> max_steps) {
    fs::path config_dir;
    auto config = load_config(g, config_dir);
    if (max_steps) config.set("train.max_steps", std::to_string(*max_steps));
    const fs::path out = g.out.empty() ? fs::path("run_" + stage) : fs::path(g.out);
    auto run = train_stage_from_config(config, config_dir, parse_attribute(stage), out);
    std::cout << "trained " << stage << " stage for " << run.steps << " steps; checkpoint " << run.checkpoint.string()
              << '\n';
    return kExitOk;
}

struct GenerateFlags {
    std::string order = "PE";
    int poses = 0;
    int exprs = 0;
    std::vector<std::string> pose_targets;
    std::vector<std::string> expr_targets;
    std::string input;
    std::string pose_checkpoint;
    std::string expr_checkpoint;
    std::string subject;
};

int cmd_generate(const Globals& g, const GenerateFlags& f) {
    fs::path config_dir;
    auto config = load_config(g, config_dir);
    PipelineConfig pc;
    pc.order = parse_order(f.order);
    pc.pose_checkpoint = f.pose_checkpoint.empty() ? config.get_string("pipeline.pose_checkpoint", "") : f.pose_checkpoint;
    pc.expression_checkpoint =
        f.expr_checkpoint.empty() ? config.get_string("pipeline.expression_checkpoint", "") : f.expr_checkpoint;
    if (pc.pose_checkpoint.empty() || pc.expression_checkpoint.empty()) {
        throw UsageError("generate needs --pose-checkpoint and --expr-checkpoint");
    }
    auto model = compose(pc);
    const auto& pose_schema = model.pose_stage().schema;
    const auto& expr_schema = model.expression_stage().schema;
    pc.pose_targets = pick_targets(pose_schema, f.poses, f.pose_targets);
    pc.expression_targets = pick_targets(expr_schema, f.exprs, f.expr_targets);

    auto image = load_image(f.input, model.image_size());
    auto rng = make_generator(static_cast<std::uint64_t>(config.get_int("seed", 0)));
    auto result = model.expand(image, pc.pose_targets, pc.expression_targets, rng);

    const fs::path out = g.out.empty() ? fs::path("generated") : fs::path(g.out);
    const auto subject = f.subject.empty() ? fs::path(f.input).stem().string() : f.subject;
    auto written = write_grid(result, subject, pose_schema, expr_schema, out);
    std::ofstream pairs(out / "pairs.csv", std::ios::binary);
    pairs << "pair_id\n";
    for (const auto& p : written) pairs << p.filename().string() << '\n';

    config.set("pipeline.order", to_string(pc.order));
    config.set("pipeline.pose_checkpoint", pc.pose_checkpoint.string());
    config.set("pipeline.expression_checkpoint", pc.expression_checkpoint.string());
    write_run_metadata(config, "generate", out);
    std::cout << "wrote " << written.size() << " images and " << subject << "_sheet.png to " << out.string() << '\n';
    return kExitOk;
}

int cmd_evaluate(const Globals& g, const std::string& generated, const std::string& targets, const std::string& pairs,
                 int size) {
    fs::path config_dir;
    auto config = load_config(g, config_dir);
    auto ids = read_pair_ids(pairs, generated);
    auto report = evaluate_pairs(generated, targets, ids, size);
    const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
    fs::create_directories(out);
    write_report_csv(report, out / "report.csv");
    config.set("evaluate.generated", generated);
    config.set("evaluate.targets", targets);
    write_run_metadata(config, "evaluate", out);
    std::printf("pairs %zu  P-SNR %.4f  MSE %.5f  R-MSE %.4f\n", report.n_pairs,
                std::min(report.aggregate.psnr, kPsnrCap), report.aggregate.mse, report.aggregate.rmse);
    return kExitOk;
}

int cmd_ablate(const Globals& g, const std::vector<std::string>& runs, const std::vector<std::string>& names,
               bool synthetic, std::optional<long> steps) {
    if (runs.empty() && !synthetic) throw UsageError("ablate needs --runs <dir>... or --synthetic");
    if (!runs.empty() && synthetic) throw UsageError("--runs and --synthetic are mutually exclusive");
    fs::path config_dir;
    auto config = load_config(g, config_dir);
    const fs::path out = g.out.empty() ? fs::path("ablation") : fs::path(g.out);
    AblationRun result;
    if (synthetic) {
        if (steps) config.set("train.max_steps", std::to_string(*steps));
        result = run_synthetic_ablation(config, config_dir, out);
    } else {
        std::vector<fs::path> dirs(runs.begin(), runs.end());
        result = ablate_run_dirs(dirs, names);
    }
    write_ablation(result.table, out);
    write_run_metadata(config, "ablate", out);
    std::cout << result.table.text;
    return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Two-stage conditional GAN pipeline for multi-attribute face synthesis", "pipgan"};
    app.require_subcommand(1);
    Globals g;
    std::int64_t seed_value = 0;
    app.add_option("--config", g.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every RNG (default 0)");
    app.add_option("--out", g.out, "Output directory");

    SynthSpec synth;
    auto* synth_cmd = app.add_subcommand("synth-data", "Render the synthetic glyph-face dataset");
    synth_cmd->fallthrough();
    synth_cmd->add_option("--subjects", synth.n_subjects)->capture_default_str();
    synth_cmd->add_option("--poses", synth.k_pose)->capture_default_str();
    synth_cmd->add_option("--exprs", synth.k_expr)->capture_default_str();
    synth_cmd->add_option("--size", synth.image_size)->capture_default_str();

    std::string stage;
    long max_steps = 0;
    auto* train_cmd = app.add_subcommand("train", "Train one stage");
    train_cmd->fallthrough();
    train_cmd->add_option("--stage", stage, "pose or expression")
        ->required()
        ->check(CLI::IsMember({"pose", "expression"}));
    auto* steps_opt = train_cmd->add_option("--max-steps", max_steps)->check(CLI::PositiveNumber);

    GenerateFlags gen;
    auto* gen_cmd = app.add_subcommand("generate", "Expand one neutral image over the attribute grid");
    gen_cmd->fallthrough();
    gen_cmd->add_option("--order", gen.order)->check(CLI::IsMember({"PE", "EP"}))->capture_default_str();
    gen_cmd->add_option("--poses", gen.poses, "Number of pose targets");
    gen_cmd->add_option("--exprs", gen.exprs, "Number of expression targets");
    gen_cmd->add_option("--pose-targets", gen.pose_targets, "Pose category names")->delimiter(',');
    gen_cmd->add_option("--expr-targets", gen.expr_targets, "Expression category names")->delimiter(',');
    gen_cmd->add_option("--input", gen.input)->required();
    gen_cmd->add_option("--pose-checkpoint", gen.pose_checkpoint);
    gen_cmd->add_option("--expr-checkpoint", gen.expr_checkpoint);
    gen_cmd->add_option("--subject", gen.subject, "Output name prefix (default: input file stem)");

    std::string generated, targets, pairs;
    int eval_size = 0;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score generated images against targets");
    eval_cmd->fallthrough();
    eval_cmd->add_option("--generated", generated)->required();
    eval_cmd->add_option("--targets", targets)->required();
    eval_cmd->add_option("--pairs", pairs, "CSV with a pair_id column (default: every image in --generated)");
    eval_cmd->add_option("--size", eval_size, "Resize to this size before scoring (0 = native)");

    std::vector<std::string> runs, names;
    bool synthetic = false;
    long ablate_steps = 0;
    auto* ablate_cmd = app.add_subcommand("ablate", "Build the method comparison table");
    ablate_cmd->fallthrough();
    ablate_cmd->add_option("--runs", runs, "Run directories holding report.csv");
    ablate_cmd->add_option("--names", names, "Method names for --runs")->delimiter(',');
    ablate_cmd->add_flag("--synthetic", synthetic, "Train and score all eight methods");
    auto* ablate_steps_opt = ablate_cmd->add_option("--steps", ablate_steps, "Steps per stage")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        if (*synth_cmd) return cmd_synth(g, synth);
        if (*train_cmd) return cmd_train(g, stage, *steps_opt ? std::optional<long>(max_steps) : std::nullopt);
        if (*gen_cmd) return cmd_generate(g, gen);
        if (*eval_cmd) return cmd_evaluate(g, generated, targets, pairs, eval_size);
        if (*ablate_cmd) {
            return cmd_ablate(g, runs, names, synthetic,
                              *ablate_steps_opt ? std::optional<long>(ablate_steps) : std::nullopt);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("pipgan");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pipgan::cli
