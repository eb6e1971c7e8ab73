#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pipgan/datamodel.hpp"
#include "pipgan/networks.hpp"

namespace pipgan {

enum class PipelineOrder { PE, EP };

std::string to_string(PipelineOrder order);
PipelineOrder parse_order(const std::string& name);

struct PipelineConfig {
    PipelineOrder order = PipelineOrder::PE;
    std::filesystem::path pose_checkpoint;
    std::filesystem::path expression_checkpoint;
    std::vector<int> pose_targets;
    std::vector<int> expression_targets;
    /// A stage asked for its own neutral category returns its input unchanged.
    bool passthrough_neutral = true;
};

struct StageModel {
    Generator generator{nullptr};
    AttributeSchema schema;
    Attribute attribute = Attribute::pose;
    int image_size = 0;

    /// Runs the generator for one category; `image` is [3, H, W] or [B, 3, H, W].
    Image apply(const Image& image, int category, std::optional<torch::Generator> rng,
                bool passthrough_neutral) const;
};

struct GridCell {
    int pose = 0;
    int expression = 0;
    Image image;
};

struct ExpandResult {
    std::vector<GridCell> outputs;
    /// Stage-1 outputs, one per stage-1 target, clamped to [0, 1].
    std::vector<GridCell> intermediates;
    Attribute first_stage = Attribute::pose;
};

/// Two trained stages chained in PE or EP order. Immutable after compose.
class PipelineModel {
public:
    PipelineModel(PipelineOrder order, StageModel pose_stage, StageModel expression_stage,
                  bool passthrough_neutral = true);

    /// Outputs ordered pose-major (pose_set outer, expr_set inner) in both orders.
    ExpandResult expand(const Image& neutral_image, const std::vector<int>& pose_set,
                        const std::vector<int>& expr_set,
                        std::optional<torch::Generator> rng = std::nullopt) const;

    PipelineOrder order() const noexcept { return order_; }
    const StageModel& pose_stage() const noexcept { return pose_; }
    const StageModel& expression_stage() const noexcept { return expression_; }
    int image_size() const noexcept { return pose_.image_size; }

private:
    PipelineOrder order_;
    StageModel pose_;
    StageModel expression_;
    bool passthrough_neutral_;
};

/// Loads one checkpoint as an inference-only stage (eval mode, no grad).
StageModel load_stage(const std::filesystem::path& checkpoint, Attribute attribute);

/// Throws SchemaMismatch or SizeMismatch.
PipelineModel compose(const PipelineConfig& config);
PipelineModel compose(StageModel pose_stage, StageModel expression_stage, PipelineOrder order,
                      bool passthrough_neutral = true);

/// Writes `{subject}_{pose}_{expr}.png` per output plus `{subject}_sheet.png`
/// (rows = poses, columns = expressions) and, when present, the intermediates
/// as `{subject}_stage1_{category}.png`. Returns the written output paths.
std::vector<std::filesystem::path> write_grid(const ExpandResult& result, const std::string& subject,
                                              const AttributeSchema& pose_schema,
                                              const AttributeSchema& expr_schema,
                                              const std::filesystem::path& out_dir);

}  // namespace pipgan
