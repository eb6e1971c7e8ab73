#include "pipgan/losses.hpp"

#include "pipgan/errors.hpp"

namespace pipgan {

void LossWeights::validate() const {
    for (double w : {adversarial, cascade, gradient_penalty, classification, l1}) {
        if (!(w >= 0.0)) throw InvalidArgument("loss weights must be non-negative");
    }
}

std::string to_string(LambdaMode mode) { return mode == LambdaMode::unit ? "unit" : "inverse_numel"; }

LambdaMode parse_lambda_mode(const std::string& name) {
    if (name == "unit") return LambdaMode::unit;
    if (name == "inverse_numel") return LambdaMode::inverse_numel;
    throw InvalidArgument("unknown lambda mode '" + name + "' (expected unit or inverse_numel)");
}

torch::Tensor adversarial_d_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
    auto real_term = -torch::log(torch::sigmoid(real_logits).clamp(kLogEpsilon, 1.0));
    auto fake_term = -torch::log((1.0 - torch::sigmoid(fake_logits)).clamp(kLogEpsilon, 1.0));
    return real_term.mean() + fake_term.mean();
}

torch::Tensor adversarial_g_loss(const torch::Tensor& fake_logits, AdversarialForm form) {
    auto p = torch::sigmoid(fake_logits);
    if (form == AdversarialForm::saturating) return torch::log((1.0 - p).clamp(kLogEpsilon, 1.0)).mean();
    return -torch::log(p.clamp(kLogEpsilon, 1.0)).mean();
}

torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
    if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
        throw ShapeMismatch("classification_loss expects logits [B, K] and labels [B]");
    }
    const auto k = logits.size(1);
    if (labels.numel() > 0 && (labels.min().item<int64_t>() < 0 || labels.max().item<int64_t>() >= k)) {
        throw InvalidArgument("classification label outside [0, " + std::to_string(k) + ")");
    }
    return torch::nll_loss(torch::log_softmax(logits, 1), labels.to(torch::kLong));
}

torch::Tensor cascade_loss(std::span<const torch::Tensor> target_features,
                           std::span<const torch::Tensor> generated_features, std::span<const double> lambdas) {
    if (target_features.size() != generated_features.size() || lambdas.size() != target_features.size()) {
        throw ShapeMismatch("cascade_loss: " + std::to_string(target_features.size()) + " target maps, " +
                            std::to_string(generated_features.size()) + " generated maps, " +
                            std::to_string(lambdas.size()) + " weights");
    }
    torch::Tensor total;
    for (std::size_t n = 0; n < lambdas.size(); ++n) {
        if (target_features[n].sizes() != generated_features[n].sizes()) {
            throw ShapeMismatch("cascade_loss: level " + std::to_string(n) + " shapes differ");
        }
        auto term = lambdas[n] * (target_features[n] - generated_features[n]).abs().mean();
        total = total.defined() ? total + term : term;
    }
    return total.defined() ? total : torch::zeros({});
}

torch::Tensor cascade_loss(const CascadeNet& net, const torch::Tensor& target, const torch::Tensor& generated,
                           std::span<const double> lambdas) {
    if (target.sizes() != generated.sizes()) throw ShapeMismatch("cascade_loss: image shapes differ");
    auto cascade = net;
    std::vector<torch::Tensor> target_features;
    {
        torch::NoGradGuard guard;
        target_features = cascade->forward(target);
    }
    auto generated_features = cascade->forward(generated);
    return cascade_loss(target_features, generated_features, lambdas);
}

std::vector<double> cascade_lambdas(const CascadeNet& net, int image_size, LambdaMode mode) {
    std::vector<double> lambdas(CascadeNetImpl::kLevels, 1.0);
    if (mode == LambdaMode::inverse_numel) {
        torch::NoGradGuard guard;
        auto cascade = net;
        auto features = cascade->forward(torch::zeros({1, 3, image_size, image_size}));
        for (std::size_t n = 0; n < features.size(); ++n) lambdas[n] = 1.0 / static_cast<double>(features[n].numel());
    }
    return lambdas;
}

torch::Tensor sample_alpha(int64_t batch, torch::Generator& rng, torch::Dtype dtype) {
    return torch::rand({batch}, rng, torch::TensorOptions().dtype(dtype));
}

torch::Tensor critic_input_gradient(const CriticFn& critic, const torch::Tensor& condition_image,
                                    const torch::Tensor& point, bool create_graph) {
    auto scores = critic(condition_image, point);
    if (scores.dim() != 1 || scores.size(0) != point.size(0)) {
        throw ShapeMismatch("critic must return one score per sample");
    }
    // Samples are independent, so the gradient of the sum is the per-sample gradient.
    return torch::autograd::grad({scores.sum()}, {point}, {}, /*retain_graph=*/true, create_graph)[0];
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& condition_image,
                               const torch::Tensor& real_candidate, const torch::Tensor& fake_candidate,
                               const torch::Tensor& alpha) {
    if (real_candidate.sizes() != fake_candidate.sizes()) throw ShapeMismatch("gradient_penalty: candidate shapes differ");
    if (alpha.dim() != 1 || alpha.size(0) != real_candidate.size(0)) {
        throw ShapeMismatch("gradient_penalty: need one alpha per sample");
    }
    std::vector<int64_t> view(static_cast<std::size_t>(real_candidate.dim()), 1);
    view[0] = real_candidate.size(0);
    auto a = alpha.to(real_candidate.dtype()).view(view);
    auto point = (1.0 - a) * real_candidate + a * fake_candidate;
    if (!point.requires_grad()) point = point.detach().requires_grad_(true);
    auto grad = critic_input_gradient(critic, condition_image.detach(), point, /*create_graph=*/true);
    auto norm = torch::sqrt(grad.flatten(1).pow(2).sum(1) + 1e-12);
    return (norm - 1.0).pow(2).mean();
}

torch::Tensor l1_loss(const torch::Tensor& target, const torch::Tensor& generated) {
    if (target.sizes() != generated.sizes()) throw ShapeMismatch("l1_loss: shapes differ");
    return (target - generated).abs().mean();
}

torch::Tensor total_generator_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    torch::Tensor total;
    auto add = [&](const torch::Tensor& term, double w) {
        if (!term.defined() || w == 0.0) return;
        auto scaled = w * term;
        total = total.defined() ? total + scaled : scaled;
    };
    add(parts.adversarial, weights.adversarial);
    add(parts.cascade, weights.cascade);
    add(parts.gradient_penalty, weights.gradient_penalty);
    add(parts.classification, weights.classification);
    add(parts.l1, weights.l1);
    return total.defined() ? total : torch::zeros({});
}

void require_double_backward() {
    try {
        auto x = torch::tensor({1.5}, torch::requires_grad());
        auto y = (x * x * x).sum();
        auto g = torch::autograd::grad({y}, {x}, {}, true, true)[0];
        g.sum().backward();
        if (!x.grad().defined() || std::abs(x.grad().item<double>() - 9.0) > 1e-5) {
            throw CapabilityError("backend returned a wrong second derivative");
        }
    } catch (const c10::Error& e) {
        throw CapabilityError(std::string("backend cannot differentiate gradients: ") + e.what_without_backtrace());
    }
}

}  // namespace pipgan
