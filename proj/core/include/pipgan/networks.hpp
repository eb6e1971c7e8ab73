#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace pipgan {

enum class NoiseMode { off, dropout };

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& name);

/// Architecture sizes shared by the generator and the discriminator.
struct NetworkConfig {
    int image_size = 64;
    /// Number of stride-2 encoder stages; 0 derives log2(image_size) so the
    /// code is 1x1.
    int encoder_depth = 0;
    /// Width of the first encoder stage. Stage i has min(base * 2^i, 8 * base)
    /// channels, which gives 64-128-256-512-512-512 for the default.
    int base_channels = 64;
    int num_classes = 5;
    NoiseMode noise_mode = NoiseMode::off;
    double dropout = 0.5;
    /// Stride-2 discriminator stages; 0 derives min(4, log2(image_size) - 2).
    int disc_depth = 0;
    int disc_base_channels = 64;
    /// Kernel of the two bottleneck convolutions. The code is 1x1, so only
    /// the center tap of a 3x3 kernel ever sees data.
    int residual_kernel = 3;
    /// Zero the last decoder stage so an untrained generator outputs 0.5 gray.
    bool zero_init_final = false;

    int resolved_encoder_depth() const;
    int resolved_disc_depth() const;
    int encoder_channels(int stage) const;
    int code_channels() const { return encoder_channels(resolved_encoder_depth() - 1); }
    /// Throws InvalidArgument when the depth does not reduce image_size to 1x1.
    void validate() const;
};

struct EncodeResult {
    /// Pre-activation code from the bottleneck, [B, C, 1, 1].
    torch::Tensor x_c1;
    /// f(x_c1 + b_c1).
    torch::Tensor y_c1;
    /// Encoder stage outputs from highest to lowest resolution; the last one
    /// feeds the bottleneck and is not copied.
    std::vector<torch::Tensor> skips;
};

/// Encoder/decoder generator with a parallel-classification tap on the coded
/// layer and additive one-hot conditioning.
///
/// Encoder stage i is conv4x4/s2 (+ batch norm except at the first and the
/// innermost stage) applied to the leaky-activated output of stage i-1. The
/// bottleneck is one residual block of two 3x3 convolutions. The decoder
/// mirrors the encoder with transposed convolutions and concatenates the
/// encoder output of equal resolution before each stage but the first.
class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const NetworkConfig& config);

    EncodeResult encode(const torch::Tensor& image);
    /// Logits [B, K] from y_c1. Does not touch the conditioning parameters.
    torch::Tensor classify_code(const torch::Tensor& y_c1);
    /// f(x_c1 + w_c2 C + b_c2); `condition` is [B, K].
    torch::Tensor inject_condition(const torch::Tensor& x_c1, const torch::Tensor& condition);
    /// Returns an image in [0, 1]. `rng` drives dropout when noise is on; when
    /// absent the global generator is used.
    torch::Tensor decode(const torch::Tensor& y_c2, const std::vector<torch::Tensor>& skips,
                         std::optional<torch::Generator> rng = std::nullopt,
                         std::vector<torch::Tensor>* stage_inputs = nullptr);
    torch::Tensor generate(const torch::Tensor& image, const torch::Tensor& condition,
                           std::optional<torch::Generator> rng = std::nullopt);

    const NetworkConfig& config() const noexcept { return config_; }

    torch::Tensor& code_bias_1() { return b_c1_; }
    torch::Tensor& code_bias_2() { return b_c2_; }
    torch::nn::Linear& pc_head() { return pc_head_; }
    torch::nn::Linear& cond_inject() { return w_c2_; }

    /// Parameters of the encoder and bottleneck only.
    std::vector<torch::Tensor> encoder_parameters();
    /// Parameters of the decoder stages only.
    std::vector<torch::Tensor> decoder_parameters();

private:
    NetworkConfig config_;
    int depth_ = 0;
    std::vector<torch::nn::Sequential> encoder_;
    torch::nn::Conv2d res_conv1_{nullptr};
    torch::nn::Conv2d res_conv2_{nullptr};
    torch::Tensor b_c1_;
    torch::Tensor b_c2_;
    torch::nn::Linear pc_head_{nullptr};
    torch::nn::Linear w_c2_{nullptr};
    std::vector<torch::nn::ConvTranspose2d> up_;
    std::vector<torch::nn::BatchNorm2d> up_norm_;
};
TORCH_MODULE(Generator);

/// Conditional patch discriminator over the channel-concatenated
/// (condition image, candidate image) pair. No normalization layers, so each
/// sample's logits depend on that sample only.
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const NetworkConfig& config);

    /// Raw logit map [B, 1, h, w].
    torch::Tensor forward(const torch::Tensor& condition_image, const torch::Tensor& candidate);
    /// Mean of the logit map per sample, [B].
    torch::Tensor score(const torch::Tensor& condition_image, const torch::Tensor& candidate);

    int logit_size() const noexcept { return logit_size_; }

private:
    torch::nn::Sequential body_{nullptr};
    int image_size_ = 0;
    int logit_size_ = 0;
};
TORCH_MODULE(Discriminator);

enum class CascadeLayout {
    /// One 3x3 convolution per level (16-32-64-128-128), random frozen weights.
    compact,
    /// 19-layer VGG feature stack up to conv5_2, tapped at conv{1..5}_2.
    vgg19,
};

std::string to_string(CascadeLayout layout);
CascadeLayout parse_cascade_layout(const std::string& name);

/// Frozen multi-level feature network for the cascade loss. Levels are
/// separated by 2x2 average pooling, so the N = 5 maps have strictly
/// decreasing resolution. Parameters never require gradients.
class CascadeNetImpl : public torch::nn::Module {
public:
    static constexpr int kLevels = 5;

    CascadeNetImpl(CascadeLayout layout, std::uint64_t seed);

    /// `image` in [0, 1]; returns kLevels feature maps.
    std::vector<torch::Tensor> forward(const torch::Tensor& image);
    CascadeLayout layout() const noexcept { return layout_; }

    /// Loads weights written by torch::save / torch.jit.save with parameter
    /// names level{n}.{i}.weight / .bias.
    void load_weights(const std::string& path);

private:
    CascadeLayout layout_;
    std::vector<torch::nn::Sequential> levels_;
};
TORCH_MODULE(CascadeNet);

/// Builds the cascade network for a config: pretrained VGG weights when
/// `weights_path` is non-empty, else seeded random compact features.
CascadeNet make_cascade_net(const std::string& weights_path, std::uint64_t seed);

/// Discriminator plus frozen cascade network and its per-level weights.
struct HybridCritic {
    Discriminator discriminator{nullptr};
    CascadeNet cascade{nullptr};
    std::vector<double> lambdas;
};

/// FNV-1a over the raw bytes of every parameter and buffer.
std::string parameter_digest(const torch::nn::Module& module);

/// Deterministic CPU generator.
torch::Generator make_generator(std::uint64_t seed);

}  // namespace pipgan
