#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pipgan/config.hpp"
#include "pipgan/datamodel.hpp"
#include "pipgan/losses.hpp"
#include "pipgan/networks.hpp"

namespace pipgan {

struct TrainConfig {
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int batch_size = 8;
    long max_steps = 20000;
    int d_steps_per_g_step = 1;
    std::uint64_t seed = 0;
    /// Single intra-op thread and deterministic kernels.
    bool deterministic = true;
    /// Evaluate on the eval records every n steps (0 = only at the end).
    long eval_every = 0;

    NetworkConfig network;
    LossWeights weights;
    AdversarialForm adversarial_form = AdversarialForm::non_saturating;
    LambdaMode lambda_mode = LambdaMode::unit;
    /// Let the gradient penalty reach the generator as part of its total.
    bool gp_in_generator = false;
    std::string cascade_weights_path;

    std::string stage_name = "pose";
    Attribute attribute = Attribute::pose;
    AttributeSchema schema = AttributeSchema::kdef_pose();

    void validate() const;

    /// Reads the documented keys (`train.*`, `model.*`, `loss.*`,
    /// `cascade.*`); missing keys keep their defaults.
    static TrainConfig from_config(const Config& config);
    Config to_config() const;
};

/// Generator, critic, optimizers and RNG streams for one stage.
struct TrainState {
    TrainConfig config;
    Generator generator{nullptr};
    HybridCritic critic;
    std::unique_ptr<torch::optim::Adam> generator_optimizer;
    std::unique_ptr<torch::optim::Adam> discriminator_optimizer;
    long step = 0;
    torch::Generator rng;
    std::mt19937_64 batch_rng;

    static TrainState create(const TrainConfig& config);
};

struct LossRecord {
    long step = 0;
    double adv_d = 0;
    double adv_g = 0;
    double pc = 0;
    double cascade = 0;
    double gp = 0;
    double l1 = 0;
    double total = 0;
};

enum class TrainPhase {
    discriminator_update,
    classification_pass,
    generation_pass,
    generator_update,
};

std::string to_string(TrainPhase phase);

/// Called after each phase of a training step.
using PhaseObserver = std::function<void(TrainPhase, TrainState&)>;

struct StepReport {
    LossRecord losses;
    std::vector<TrainPhase> phases;
    int generator_optimizer_steps = 0;
    int discriminator_optimizer_steps = 0;
};

/// One step in the parallel-classification order: discriminator update,
/// classification pass, generation pass, then a single generator update.
/// Throws NonFiniteLoss.
StepReport train_step(TrainState& state, const std::vector<SampleRecord>& batch,
                      const PhaseObserver& observer = {});

struct MetricSnapshot {
    long step = 0;
    double l1 = 0;
    double psnr = 0;
    double mse = 0;
    double rmse = 0;
};

struct TrainResult {
    TrainState state;
    std::vector<LossRecord> losses;
    std::vector<MetricSnapshot> history;
};

/// Runs max_steps steps over shuffled batches of `train`, snapshotting
/// metrics on `eval` (or on `train` if `eval` is empty).
TrainResult train_stage(const TrainConfig& config, const std::vector<SampleRecord>& train,
                        const std::vector<SampleRecord>& eval,
                        const std::function<void(const LossRecord&)>& on_step = {});

/// Generates outputs for `records` in eval mode, in chunks of `batch_size`.
torch::Tensor generate_records(TrainState& state, const std::vector<SampleRecord>& records,
                               int batch_size = 16);
MetricSnapshot evaluate_records(TrainState& state, const std::vector<SampleRecord>& records,
                                long step);

/// `step,loss_adv_d,loss_adv_g,loss_pc,loss_cascade,loss_gp,loss_l1,total`
std::string loss_log_header();
std::string format_loss_row(const LossRecord& record);
void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& losses);

// --- checkpoints ---

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    int version = kCheckpointVersion;
    std::string stage_name;
    Attribute attribute = Attribute::pose;
    AttributeSchema schema;
    int image_size = 0;
    long steps = 0;
    Config config;
    std::string config_hash;
    std::vector<MetricSnapshot> history;
};

struct Checkpoint {
    TrainState state;
    CheckpointMeta meta;
};

CheckpointMeta make_meta(const TrainState& state, const std::vector<MetricSnapshot>& history);

/// Writes `state.pt` (parameters and optimizer moments) and `meta.json` into
/// the directory `path`.
void save_checkpoint(const TrainState& state, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

/// Throws MissingFile, VersionMismatch, CorruptCheckpoint, or SchemaMismatch
/// when `expected_schema` is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<AttributeSchema>& expected_schema = std::nullopt);

}  // namespace pipgan
