#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "pipgan/datamodel.hpp"
#include "pipgan/image_io.hpp"
#include "pipgan/networks.hpp"
#include "pipgan/training.hpp"

namespace pipgan::test {

/// Directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "pipgan") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Small network for fast tests: 8 px, base width 4, K classes.
inline NetworkConfig tiny_network(int k = 3, int image_size = 8, int base = 4) {
    NetworkConfig n;
    n.image_size = image_size;
    n.base_channels = base;
    n.disc_base_channels = base;
    n.num_classes = k;
    return n;
}

/// Generator of at most ~600 parameters at 8 px (used by gradient checks).
inline NetworkConfig gradcheck_network(int k = 3) {
    NetworkConfig n;
    n.image_size = 8;
    n.base_channels = 1;
    n.disc_base_channels = 2;
    n.residual_kernel = 1;
    n.num_classes = k;
    return n;
}

inline TrainConfig tiny_train_config(int image_size, int base, const AttributeSchema& schema) {
    TrainConfig t;
    t.network = tiny_network(schema.size(), image_size, base);
    t.schema = schema;
    t.attribute = schema.name == "expression" ? Attribute::expression : Attribute::pose;
    t.stage_name = schema.name;
    t.batch_size = 4;
    t.max_steps = 10;
    return t;
}

/// Pose-stage records rendered in memory: each subject's neutral pose goes to
/// every other pose at the neutral expression.
inline std::vector<SampleRecord> glyph_pose_records(const SynthSpec& spec) {
    const auto pose = spec.pose_schema();
    const int expr = spec.expression_schema().neutral_index;
    auto glyph = [&](int s, int p) {
        return from_rgb8(render_glyph(spec, s, p, expr), spec.image_size, spec.image_size);
    };
    std::vector<SampleRecord> records;
    for (int s = 0; s < spec.n_subjects; ++s) {
        const auto source = glyph(s, pose.neutral_index);
        for (int p = 0; p < pose.size(); ++p) {
            if (p == pose.neutral_index) continue;
            records.push_back({source, glyph(s, p), ConditionVector::one_hot(p, pose.size()),
                               "s" + std::to_string(s), expr});
        }
    }
    return records;
}

inline torch::Tensor random_images(int64_t batch, int size, uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
    auto gen = make_generator(seed);
    return torch::rand({batch, 3, size, size}, gen, torch::TensorOptions().dtype(dtype));
}

}  // namespace pipgan::test
