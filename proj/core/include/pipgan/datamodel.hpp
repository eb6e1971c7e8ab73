#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace pipgan {

/// Images are float32 tensors of shape [3, H, W] with values in [0, 1].
using Image = torch::Tensor;

enum class Attribute { pose, expression };

std::string to_string(Attribute attribute);
Attribute parse_attribute(const std::string& name);

struct AttributeSchema {
    std::string name;
    std::vector<std::string> categories;
    int neutral_index = 0;

    int size() const noexcept { return static_cast<int>(categories.size()); }
    /// Throws UnknownCategory.
    int index_of(const std::string& category) const;
    /// Throws InvalidArgument when categories are empty or repeated, or the
    /// neutral index is out of range.
    void validate() const;

    bool operator==(const AttributeSchema&) const = default;

    /// Five head angles, frontal in the middle.
    static AttributeSchema kdef_pose();
    /// Seven basic expressions, neutral at index 4.
    static AttributeSchema kdef_expression();
    /// `prefix0 .. prefix{k-1}`.
    static AttributeSchema numbered(std::string name, std::string prefix, int k, int neutral_index);
};

struct ManifestRow {
    std::string subject_id;
    int pose = 0;
    int expression = 0;
    /// Absolute path (resolved against the manifest's directory on load).
    std::filesystem::path path;

    int index(Attribute attribute) const { return attribute == Attribute::pose ? pose : expression; }
};

/// One-hot attribute code injected at the coded layer.
struct ConditionVector {
    int k = 0;
    int dim = 0;

    static ConditionVector one_hot(int k, int dim);
    /// Float tensor of shape [dim].
    torch::Tensor encoding(torch::Dtype dtype = torch::kFloat32) const;
};

/// Stacks conditions into a [B, K] batch.
torch::Tensor stack_conditions(const std::vector<ConditionVector>& conditions,
                               torch::Dtype dtype = torch::kFloat32);

struct SampleRecord {
    Image input;
    Image target;
    ConditionVector condition;
    std::string subject_id;
    /// Index of the non-varying attribute the pair was drawn at.
    int other_index = 0;
};

/// Which attribute a stage edits and at which values of the other attribute
/// its pairs are drawn.
struct StageSpec {
    Attribute varying = Attribute::pose;
    /// Restricts pairs to one value of the other attribute; nullopt = every value.
    std::optional<int> fixed_other;
    bool include_identity = false;
};

struct SynthSpec {
    int n_subjects = 8;
    int k_pose = 5;
    int k_expr = 7;
    int image_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    AttributeSchema pose_schema() const;
    AttributeSchema expression_schema() const;
};

/// Reads a `subject_id,pose,expression,path` CSV. Category columns hold
/// category names from the given schemas.
std::vector<ManifestRow> load_manifest(const std::filesystem::path& path,
                                       const AttributeSchema& pose_schema,
                                       const AttributeSchema& expr_schema);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows,
                    const AttributeSchema& pose_schema, const AttributeSchema& expr_schema);

/// Builds (source -> category-k) training pairs for one stage. The source of
/// a pair is the subject's image at the neutral category of the varying
/// attribute, taken at the same value of the other attribute.
std::vector<SampleRecord> pair_for_stage(const std::vector<ManifestRow>& rows,
                                         const AttributeSchema& pose_schema,
                                         const AttributeSchema& expr_schema, const StageSpec& stage,
                                         int image_size);

/// Subject-disjoint split; the train side gets round(ratio * n_subjects) subjects.
std::pair<std::vector<ManifestRow>, std::vector<ManifestRow>> split_subjects(
    const std::vector<ManifestRow>& rows, double ratio, std::uint64_t seed);

/// Distinct subject ids in order of first appearance.
std::vector<std::string> subject_ids(const std::vector<ManifestRow>& rows);

/// Renders the glyph-face dataset into `out_dir` and returns the manifest path.
/// Also writes `dataset.toml` with the schema keys needed to reload it.
std::filesystem::path synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Renders one glyph face as 8-bit RGB, row-major HWC.
std::vector<std::uint8_t> render_glyph(const SynthSpec& spec, int subject, int pose, int expression);

}  // namespace pipgan
