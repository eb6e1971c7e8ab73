#include "pipgan/pipeline.hpp"

#include <algorithm>

#include "pipgan/errors.hpp"
#include "pipgan/image_io.hpp"
#include "pipgan/training.hpp"

namespace pipgan {
namespace fs = std::filesystem;

std::string to_string(PipelineOrder order) { return order == PipelineOrder::PE ? "PE" : "EP"; }

PipelineOrder parse_order(const std::string& name) {
    if (name == "PE" || name == "pe") return PipelineOrder::PE;
    if (name == "EP" || name == "ep") return PipelineOrder::EP;
    throw InvalidArgument("unknown pipeline order '" + name + "' (expected PE or EP)");
}

namespace {

void check_targets(const std::vector<int>& targets, const AttributeSchema& schema) {
    if (targets.empty()) throw InvalidArgument("empty " + schema.name + " target set");
    for (int t : targets) {
        if (t < 0 || t >= schema.size()) {
            throw SchemaMismatch(schema.name + " target " + std::to_string(t) + " outside the checkpoint's " +
                                 std::to_string(schema.size()) + " categories");
        }
    }
}

// Applies the stage once per (image, category) pair; images [N, 3, H, W].
torch::Tensor apply_each(const StageModel& stage, const torch::Tensor& images, const std::vector<int>& categories,
                         std::optional<torch::Generator> rng, bool passthrough_neutral) {
    torch::NoGradGuard guard;
    std::vector<int64_t> run_rows;
    std::vector<ConditionVector> conditions;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (passthrough_neutral && categories[i] == stage.schema.neutral_index) continue;
        run_rows.push_back(static_cast<int64_t>(i));
        conditions.push_back(ConditionVector::one_hot(categories[i], stage.schema.size()));
    }
    auto out = images.clone();
    if (run_rows.empty()) return out;
    auto index = torch::tensor(run_rows, torch::kLong);
    auto generator = stage.generator;
    auto generated = generator->generate(images.index_select(0, index), stack_conditions(conditions), rng);
    out.index_copy_(0, index, generated.clamp(0.0, 1.0));
    return out;
}

}  // namespace

Image StageModel::apply(const Image& image, int category, std::optional<torch::Generator> rng,
                        bool passthrough_neutral) const {
    const bool single = image.dim() == 3;
    auto batch = single ? image.unsqueeze(0) : image;
    std::vector<int> categories(static_cast<std::size_t>(batch.size(0)), category);
    auto out = apply_each(*this, batch, categories, std::move(rng), passthrough_neutral);
    return single ? out.squeeze(0) : out;
}

PipelineModel::PipelineModel(PipelineOrder order, StageModel pose_stage, StageModel expression_stage,
                             bool passthrough_neutral)
    : order_(order),
      pose_(std::move(pose_stage)),
      expression_(std::move(expression_stage)),
      passthrough_neutral_(passthrough_neutral) {}

ExpandResult PipelineModel::expand(const Image& neutral_image, const std::vector<int>& pose_set,
                                   const std::vector<int>& expr_set, std::optional<torch::Generator> rng) const {
    check_targets(pose_set, pose_.schema);
    check_targets(expr_set, expression_.schema);
    const int size = image_size();
    if (neutral_image.dim() != 3 || neutral_image.size(0) != 3 || neutral_image.size(1) != size ||
        neutral_image.size(2) != size) {
        throw ShapeMismatch("expand: input must be [3, " + std::to_string(size) + ", " + std::to_string(size) + "]");
    }

    const bool pose_first = order_ == PipelineOrder::PE;
    const auto& first = pose_first ? pose_ : expression_;
    const auto& second = pose_first ? expression_ : pose_;
    const auto& first_set = pose_first ? pose_set : expr_set;
    const auto& second_set = pose_first ? expr_set : pose_set;

    auto input = neutral_image.to(torch::kFloat32).unsqueeze(0).expand({static_cast<int64_t>(first_set.size()), 3, size, size});
    auto intermediates = apply_each(first, input.contiguous(), first_set, rng, passthrough_neutral_).clamp(0.0, 1.0);

    // Every intermediate crossed with every second-stage category.
    const auto n1 = static_cast<int64_t>(first_set.size());
    const auto n2 = static_cast<int64_t>(second_set.size());
    auto repeated = intermediates.unsqueeze(1).expand({n1, n2, 3, size, size}).reshape({n1 * n2, 3, size, size});
    std::vector<int> categories;
    for (int64_t i = 0; i < n1; ++i) categories.insert(categories.end(), second_set.begin(), second_set.end());
    auto finals = apply_each(second, repeated.contiguous(), categories, rng, passthrough_neutral_);

    ExpandResult result;
    result.first_stage = pose_first ? Attribute::pose : Attribute::expression;
    for (int64_t i = 0; i < n1; ++i) {
        GridCell cell;
        cell.image = intermediates[i];
        if (pose_first) {
            cell.pose = first_set[static_cast<std::size_t>(i)];
            cell.expression = expression_.schema.neutral_index;
        } else {
            cell.pose = pose_.schema.neutral_index;
            cell.expression = first_set[static_cast<std::size_t>(i)];
        }
        result.intermediates.push_back(std::move(cell));
    }
    for (std::size_t p = 0; p < pose_set.size(); ++p) {
        for (std::size_t e = 0; e < expr_set.size(); ++e) {
            const auto row = pose_first ? static_cast<int64_t>(p * expr_set.size() + e)
                                        : static_cast<int64_t>(e * pose_set.size() + p);
            result.outputs.push_back({pose_set[p], expr_set[e], finals[row]});
        }
    }
    return result;
}

StageModel load_stage(const fs::path& checkpoint, Attribute attribute) {
    auto loaded = load_checkpoint(checkpoint);
    if (loaded.meta.attribute != attribute) {
        throw SchemaMismatch("checkpoint " + checkpoint.string() + " edits " + to_string(loaded.meta.attribute) +
                             ", not " + to_string(attribute));
    }
    StageModel stage;
    stage.generator = loaded.state.generator;
    stage.generator->eval();
    for (auto& p : stage.generator->parameters()) p.set_requires_grad(false);
    stage.schema = loaded.meta.schema;
    stage.attribute = attribute;
    stage.image_size = loaded.meta.image_size;
    return stage;
}

PipelineModel compose(StageModel pose_stage, StageModel expression_stage, PipelineOrder order,
                      bool passthrough_neutral) {
    if (pose_stage.attribute != Attribute::pose || expression_stage.attribute != Attribute::expression) {
        throw SchemaMismatch("compose needs a pose stage and an expression stage");
    }
    if (pose_stage.image_size != expression_stage.image_size) {
        throw SizeMismatch("stage image sizes differ: pose " + std::to_string(pose_stage.image_size) +
                           " px, expression " + std::to_string(expression_stage.image_size) + " px");
    }
    return PipelineModel(order, std::move(pose_stage), std::move(expression_stage), passthrough_neutral);
}

PipelineModel compose(const PipelineConfig& config) {
    auto pose = load_stage(config.pose_checkpoint, Attribute::pose);
    auto expression = load_stage(config.expression_checkpoint, Attribute::expression);
    if (!config.pose_targets.empty()) check_targets(config.pose_targets, pose.schema);
    if (!config.expression_targets.empty()) check_targets(config.expression_targets, expression.schema);
    return compose(std::move(pose), std::move(expression), config.order, config.passthrough_neutral);
}

std::vector<fs::path> write_grid(const ExpandResult& result, const std::string& subject,
                                 const AttributeSchema& pose_schema, const AttributeSchema& expr_schema,
                                 const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    std::vector<int> poses, exprs;
    std::vector<Image> tiles;
    for (const auto& cell : result.outputs) {
        const auto name = subject + "_" + pose_schema.categories.at(cell.pose) + "_" +
                          expr_schema.categories.at(cell.expression) + ".png";
        save_png(cell.image, out_dir / name);
        written.push_back(out_dir / name);
        if (std::find(poses.begin(), poses.end(), cell.pose) == poses.end()) poses.push_back(cell.pose);
        if (std::find(exprs.begin(), exprs.end(), cell.expression) == exprs.end()) exprs.push_back(cell.expression);
        tiles.push_back(cell.image);
    }
    if (!tiles.empty()) {
        save_png(tile_images(tiles, static_cast<int>(poses.size()), static_cast<int>(exprs.size())),
                 out_dir / (subject + "_sheet.png"));
    }
    for (const auto& cell : result.intermediates) {
        const auto& category = result.first_stage == Attribute::pose ? pose_schema.categories.at(cell.pose)
                                                                     : expr_schema.categories.at(cell.expression);
        save_png(cell.image, out_dir / (subject + "_stage1_" + category + ".png"));
    }
    return written;
}

}  // namespace pipgan
