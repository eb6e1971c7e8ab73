#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pipgan/networks.hpp"

namespace pipgan {

inline constexpr double kLogEpsilon = 1e-7;

/// Weights of the generator objective, in the order adversarial, cascade,
/// gradient penalty, classification, L1. Defaults are (1, 1, 1, 10, 50).
struct LossWeights {
    double adversarial = 1.0;
    double cascade = 1.0;
    double gradient_penalty = 1.0;
    double classification = 10.0;
    double l1 = 50.0;

    void validate() const;
};

enum class AdversarialForm {
    /// -log D(x, G(x)).
    non_saturating,
    /// log(1 - D(x, G(x))), minimized.
    saturating,
};

enum class LambdaMode {
    /// lambda_n = 1; each level term is already a mean.
    unit,
    /// lambda_n = 1 / (elements of one sample's level-n map).
    inverse_numel,
};

std::string to_string(LambdaMode mode);
LambdaMode parse_lambda_mode(const std::string& name);

/// mean[-log s(real) - log(1 - s(fake))] with s the logistic function.
torch::Tensor adversarial_d_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor adversarial_g_loss(const torch::Tensor& fake_logits,
                                 AdversarialForm form = AdversarialForm::non_saturating);

/// Batch-mean cross entropy; `logits` [B, K], `labels` int64 [B].
torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels);

/// sum_n lambda_n * mean|target_n - generated_n|.
torch::Tensor cascade_loss(std::span<const torch::Tensor> target_features,
                           std::span<const torch::Tensor> generated_features,
                           std::span<const double> lambdas);
/// Target features are computed without gradient.
torch::Tensor cascade_loss(const CascadeNet& net, const torch::Tensor& target,
                           const torch::Tensor& generated, std::span<const double> lambdas);

std::vector<double> cascade_lambdas(const CascadeNet& net, int image_size, LambdaMode mode);

/// Per-sample critic score [B] for a (condition, candidate) pair.
using CriticFn = std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&)>;

/// alpha ~ U[0, 1], one per sample, shape [B].
torch::Tensor sample_alpha(int64_t batch, torch::Generator& rng, torch::Dtype dtype = torch::kFloat32);

/// mean[(||grad_xhat D(c, xhat)||_2 - 1)^2] with xhat = (1 - a) real + a fake,
/// interpolating only the candidate. The result is differentiable w.r.t. the
/// critic's parameters (double backward).
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& condition_image,
                               const torch::Tensor& real_candidate,
                               const torch::Tensor& fake_candidate, const torch::Tensor& alpha);

/// Per-sample gradient of the critic score at `point`, [B, ...].
torch::Tensor critic_input_gradient(const CriticFn& critic, const torch::Tensor& condition_image,
                                    const torch::Tensor& point, bool create_graph);

torch::Tensor l1_loss(const torch::Tensor& target, const torch::Tensor& generated);

struct LossParts {
    torch::Tensor adversarial;
    torch::Tensor cascade;
    torch::Tensor gradient_penalty;
    torch::Tensor classification;
    torch::Tensor l1;
};

/// Weighted sum of the five terms. Undefined parts count as zero.
torch::Tensor total_generator_loss(const LossParts& parts, const LossWeights& weights);

/// Throws CapabilityError if the backend cannot differentiate a gradient.
void require_double_backward();

}  // namespace pipgan
