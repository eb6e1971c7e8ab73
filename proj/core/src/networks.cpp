#include "pipgan/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "pipgan/config.hpp"
#include "pipgan/errors.hpp"

namespace pipgan {
namespace nn = torch::nn;

namespace {

constexpr double kLeakySlope = 0.2;

int log2_exact(int n) { return std::bit_width(static_cast<unsigned>(n)) - 1; }

torch::Tensor leaky(const torch::Tensor& x) { return torch::leaky_relu(x, kLeakySlope); }

std::string shape_string(const torch::Tensor& t) {
    std::string s = "[";
    for (int64_t i = 0; i < t.dim(); ++i) s += (i ? ", " : "") + std::to_string(t.size(i));
    return s + "]";
}

void check_image_batch(const torch::Tensor& image, int size, const char* what) {
    if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != size || image.size(3) != size) {
        throw ShapeMismatch(std::string(what) + ": expected [B, 3, " + std::to_string(size) + ", " +
                            std::to_string(size) + "], got " + shape_string(image));
    }
}

}  // namespace

std::string to_string(NoiseMode mode) { return mode == NoiseMode::off ? "off" : "dropout"; }

NoiseMode parse_noise_mode(const std::string& name) {
    if (name == "off") return NoiseMode::off;
    if (name == "dropout") return NoiseMode::dropout;
    throw InvalidArgument("unknown noise mode '" + name + "' (expected off or dropout)");
}

int NetworkConfig::resolved_encoder_depth() const {
    return encoder_depth > 0 ? encoder_depth : log2_exact(image_size);
}

int NetworkConfig::resolved_disc_depth() const {
    if (disc_depth > 0) return disc_depth;
    return std::clamp(log2_exact(image_size) - 2, 1, 4);
}

int NetworkConfig::encoder_channels(int stage) const {
    return std::min(base_channels << stage, base_channels * 8);
}

void NetworkConfig::validate() const {
    if (image_size < 8 || !std::has_single_bit(static_cast<unsigned>(image_size))) {
        throw InvalidArgument("image size must be a power of two >= 8, got " + std::to_string(image_size));
    }
    const int depth = resolved_encoder_depth();
    if ((image_size >> depth) != 1 || (depth < 31 && (1 << depth) != image_size)) {
        throw InvalidArgument("encoder depth " + std::to_string(depth) + " does not reduce " +
                              std::to_string(image_size) + " px to a 1x1 code");
    }
    if (base_channels < 1 || disc_base_channels < 1) throw InvalidArgument("channel widths must be >= 1");
    if (num_classes < 1) throw InvalidArgument("num_classes must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
    if (residual_kernel < 1 || residual_kernel % 2 == 0) throw InvalidArgument("residual kernel must be odd");
    if ((image_size >> resolved_disc_depth()) < 4) {
        throw InvalidArgument("discriminator depth leaves less than 4x4 before the final convolution");
    }
}

// --- generator ---

GeneratorImpl::GeneratorImpl(const NetworkConfig& config) : config_(config) {
    config_.validate();
    depth_ = config_.resolved_encoder_depth();
    const int code = config_.code_channels();

    for (int i = 0; i < depth_; ++i) {
        const int in = i == 0 ? 3 : config_.encoder_channels(i - 1);
        const int out = config_.encoder_channels(i);
        const bool innermost = i == depth_ - 1;
        nn::Sequential stage;
        if (i > 0) stage->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kLeakySlope)));
        stage->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(i == 0 || innermost)));
        if (i > 0 && !innermost) stage->push_back(nn::BatchNorm2d(out));
        encoder_.push_back(register_module("enc" + std::to_string(i), stage));
    }

    const int k = config_.residual_kernel;
    res_conv1_ = register_module("res_conv1", nn::Conv2d(nn::Conv2dOptions(code, code, k).padding(k / 2)));
    res_conv2_ = register_module("res_conv2", nn::Conv2d(nn::Conv2dOptions(code, code, k).padding(k / 2).bias(false)));

    b_c1_ = register_parameter("b_c1", torch::zeros({code}));
    b_c2_ = register_parameter("b_c2", torch::zeros({code}));
    pc_head_ = register_module("pc_head", nn::Linear(code, config_.num_classes));
    w_c2_ = register_module("w_c2", nn::Linear(nn::LinearOptions(config_.num_classes, code).bias(false)));

    for (int j = 0; j < depth_; ++j) {
        const bool last = j == depth_ - 1;
        const int in = j == 0 ? code
                              : config_.encoder_channels(depth_ - 1 - j) + config_.encoder_channels(depth_ - 1 - j);
        const int out = last ? 3 : config_.encoder_channels(depth_ - 2 - j);
        up_.push_back(register_module(
            "up" + std::to_string(j),
            nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(last))));
        if (!last) up_norm_.push_back(register_module("up_norm" + std::to_string(j), nn::BatchNorm2d(out)));
    }

    if (config_.zero_init_final) {
        torch::NoGradGuard guard;
        up_.back()->weight.zero_();
        up_.back()->bias.zero_();
    }
}

EncodeResult GeneratorImpl::encode(const torch::Tensor& image) {
    check_image_batch(image, config_.image_size, "encode");
    EncodeResult result;
    auto h = image * 2.0 - 1.0;
    for (auto& stage : encoder_) {
        h = stage->forward(h);
        result.skips.push_back(h);
    }
    const auto& e = result.skips.back();
    result.x_c1 = e + res_conv2_->forward(leaky(res_conv1_->forward(leaky(e))));
    result.y_c1 = leaky(result.x_c1 + b_c1_.view({1, -1, 1, 1}));
    return result;
}

torch::Tensor GeneratorImpl::classify_code(const torch::Tensor& y_c1) {
    if (y_c1.dim() != 4 || y_c1.size(1) != config_.code_channels()) {
        throw ShapeMismatch("classify_code: unexpected code shape " + shape_string(y_c1));
    }
    return pc_head_->forward(y_c1.mean({2, 3}));
}

torch::Tensor GeneratorImpl::inject_condition(const torch::Tensor& x_c1, const torch::Tensor& condition) {
    if (condition.dim() != 2 || condition.size(1) != config_.num_classes || condition.size(0) != x_c1.size(0)) {
        throw ShapeMismatch("inject_condition: condition " + shape_string(condition) + " does not match [" +
                            std::to_string(x_c1.size(0)) + ", " + std::to_string(config_.num_classes) + "]");
    }
    auto bias = w_c2_->forward(condition.to(x_c1.dtype())).view({x_c1.size(0), -1, 1, 1});
    return leaky(x_c1 + bias + b_c2_.view({1, -1, 1, 1}));
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& y_c2, const std::vector<torch::Tensor>& skips,
                                    std::optional<torch::Generator> rng,
                                    std::vector<torch::Tensor>* stage_inputs) {
    if (static_cast<int>(skips.size()) != depth_) {
        throw ShapeMismatch("decode: expected " + std::to_string(depth_) + " skip features, got " +
                            std::to_string(skips.size()));
    }
    const bool noisy = config_.noise_mode == NoiseMode::dropout && config_.dropout > 0.0;
    const int noisy_stages = std::min(3, depth_ - 1);
    auto h = y_c2;
    for (int j = 0; j < depth_; ++j) {
        if (j > 0) {
            const auto& skip = skips[static_cast<std::size_t>(depth_ - 1 - j)];
            if (skip.sizes().slice(2) != h.sizes().slice(2) || skip.size(0) != h.size(0)) {
                throw ShapeMismatch("decode: skip " + shape_string(skip) + " does not match stage input " +
                                    shape_string(h));
            }
            h = torch::relu(torch::cat({h, skip}, 1));
        }
        if (stage_inputs) stage_inputs->push_back(h);
        h = up_[static_cast<std::size_t>(j)]->forward(h);
        if (j < depth_ - 1) {
            h = up_norm_[static_cast<std::size_t>(j)]->forward(h);
            if (noisy && j < noisy_stages) {
                const double keep = 1.0 - config_.dropout;
                auto mask = torch::bernoulli(torch::full_like(h, keep), rng);
                h = h * mask / keep;
            }
        }
    }
    return (torch::tanh(h) + 1.0) * 0.5;
}

torch::Tensor GeneratorImpl::generate(const torch::Tensor& image, const torch::Tensor& condition,
                                      std::optional<torch::Generator> rng) {
    auto enc = encode(image);
    return decode(inject_condition(enc.x_c1, condition), enc.skips, std::move(rng));
}

std::vector<torch::Tensor> GeneratorImpl::encoder_parameters() {
    std::vector<torch::Tensor> params;
    for (auto& stage : encoder_) {
        auto p = stage->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    for (const auto* conv : {&res_conv1_, &res_conv2_}) {
        auto p = (*conv)->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    return params;
}

std::vector<torch::Tensor> GeneratorImpl::decoder_parameters() {
    std::vector<torch::Tensor> params;
    for (const auto& up : up_) {
        auto p = up->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    for (const auto& norm : up_norm_) {
        auto p = norm->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    return params;
}

// --- discriminator ---

DiscriminatorImpl::DiscriminatorImpl(const NetworkConfig& config) : image_size_(config.image_size) {
    config.validate();
    const int depth = config.resolved_disc_depth();
    body_ = nn::Sequential();
    int in = 6;
    for (int i = 0; i < depth; ++i) {
        const int out = std::min(config.disc_base_channels << i, config.disc_base_channels * 8);
        body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
        body_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kLeakySlope)));
        in = out;
    }
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, 1, 4)));
    register_module("body", body_);
    logit_size_ = (image_size_ >> depth) - 3;
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& condition_image, const torch::Tensor& candidate) {
    check_image_batch(condition_image, image_size_, "discriminate (condition)");
    check_image_batch(candidate, image_size_, "discriminate (candidate)");
    if (condition_image.size(0) != candidate.size(0)) throw ShapeMismatch("discriminate: batch sizes differ");
    auto pair = torch::cat({condition_image, candidate}, 1) * 2.0 - 1.0;
    return body_->forward(pair);
}

torch::Tensor DiscriminatorImpl::score(const torch::Tensor& condition_image, const torch::Tensor& candidate) {
    return forward(condition_image, candidate).flatten(1).mean(1);
}

// --- cascade network ---

std::string to_string(CascadeLayout layout) { return layout == CascadeLayout::compact ? "compact" : "vgg19"; }

CascadeLayout parse_cascade_layout(const std::string& name) {
    if (name == "compact") return CascadeLayout::compact;
    if (name == "vgg19") return CascadeLayout::vgg19;
    throw InvalidArgument("unknown cascade layout '" + name + "'");
}

CascadeNetImpl::CascadeNetImpl(CascadeLayout layout, std::uint64_t seed) : layout_(layout) {
    auto conv = [](int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)); };
    auto relu = [] { return nn::ReLU(); };
    std::vector<nn::Sequential> levels(kLevels);
    if (layout == CascadeLayout::compact) {
        const int widths[kLevels] = {16, 32, 64, 128, 128};
        int in = 3;
        for (int n = 0; n < kLevels; ++n) {
            levels[n] = nn::Sequential();
            if (n > 0) levels[n]->push_back(nn::AvgPool2d(nn::AvgPool2dOptions(2).ceil_mode(true)));
            levels[n]->push_back(conv(in, widths[n]));
            levels[n]->push_back(relu());
            in = widths[n];
        }
    } else {
        auto pool = [] { return nn::MaxPool2d(nn::MaxPool2dOptions(2).ceil_mode(true)); };
        // Taps at conv1_2, conv2_2, conv3_2, conv4_2 and conv5_2.
        levels[0] = nn::Sequential(conv(3, 64), relu(), conv(64, 64), relu());
        levels[1] = nn::Sequential(pool(), conv(64, 128), relu(), conv(128, 128), relu());
        levels[2] = nn::Sequential(pool(), conv(128, 256), relu(), conv(256, 256), relu());
        levels[3] = nn::Sequential(conv(256, 256), relu(), conv(256, 256), relu(), pool(), conv(256, 512), relu(),
                                   conv(512, 512), relu());
        levels[4] = nn::Sequential(conv(512, 512), relu(), conv(512, 512), relu(), pool(), conv(512, 512), relu(),
                                   conv(512, 512), relu());
    }
    for (int n = 0; n < kLevels; ++n) levels_.push_back(register_module("level" + std::to_string(n), levels[n]));

    // Seeded He initialization, independent of the global RNG.
    auto gen = make_generator(seed);
    torch::NoGradGuard guard;
    for (auto& item : named_parameters()) {
        auto& p = item.value();
        if (p.dim() == 4) {
            const double fan_in = static_cast<double>(p.size(1) * p.size(2) * p.size(3));
            p.copy_(torch::randn(p.sizes(), gen) * std::sqrt(2.0 / fan_in));
        } else {
            p.zero_();
        }
    }
    for (auto& p : parameters()) p.set_requires_grad(false);
    eval();
}

std::vector<torch::Tensor> CascadeNetImpl::forward(const torch::Tensor& image) {
    if (image.dim() != 4 || image.size(1) != 3) {
        throw ShapeMismatch("cascade_features: expected [B, 3, H, W], got " + shape_string(image));
    }
    torch::Tensor h;
    if (layout_ == CascadeLayout::vgg19) {
        auto opts = torch::TensorOptions().dtype(image.dtype());
        auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
        auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
        h = (image - mean) / std;
    } else {
        h = image * 2.0 - 1.0;
    }
    std::vector<torch::Tensor> features;
    for (auto& level : levels_) {
        h = level->forward(h);
        features.push_back(h);
    }
    return features;
}

void CascadeNetImpl::load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("cascade weights not found: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    c10::IValue value;
    try {
        value = torch::pickle_load(bytes);
    } catch (const c10::Error& e) {
        throw CorruptCheckpoint("cannot read cascade weights " + path + ": " + e.what_without_backtrace());
    }
    if (!value.isGenericDict()) throw CorruptCheckpoint("cascade weights must be a name -> tensor dict: " + path);
    auto dict = value.toGenericDict();
    torch::NoGradGuard guard;
    for (auto& item : named_parameters()) {
        auto it = dict.find(item.key());
        if (it == dict.end()) throw CorruptCheckpoint("cascade weights missing '" + item.key() + "' in " + path);
        auto t = it->value().toTensor();
        if (t.sizes() != item.value().sizes()) {
            throw ShapeMismatch("cascade weight '" + item.key() + "' has shape " + shape_string(t) + ", expected " +
                                shape_string(item.value()));
        }
        item.value().copy_(t);
    }
}

CascadeNet make_cascade_net(const std::string& weights_path, std::uint64_t seed) {
    if (weights_path.empty()) return CascadeNet(CascadeLayout::compact, seed);
    CascadeNet net(CascadeLayout::vgg19, seed);
    net->load_weights(weights_path);
    return net;
}

std::string parameter_digest(const torch::nn::Module& module) {
    std::string bytes;
    auto append = [&](const std::string& name, const torch::Tensor& t) {
        auto c = t.detach().contiguous().cpu();
        bytes += name;
        bytes.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
    };
    for (const auto& item : module.named_parameters()) append(item.key(), item.value());
    for (const auto& item : module.named_buffers()) append(item.key(), item.value());
    return fnv1a_hex(bytes);
}

torch::Generator make_generator(std::uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

}  // namespace pipgan
