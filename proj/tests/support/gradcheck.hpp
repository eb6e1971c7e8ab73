#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "support/oracles.hpp"

namespace pipgan::test {

struct GradCheckResult {
    int sampled = 0;
    int passed = 0;
    double worst = 0.0;

    double pass_fraction() const { return sampled ? static_cast<double>(passed) / sampled : 0.0; }
};

/// Compares autograd gradients of `loss` w.r.t. `params` with central
/// differences on `samples` randomly chosen coordinates.
inline GradCheckResult check_parameter_gradients(std::vector<torch::Tensor> params,
                                                 const std::function<torch::Tensor()>& loss, int samples,
                                                 std::uint64_t seed, double step = 1e-4,
                                                 double tolerance = 1e-3) {
    std::vector<torch::Tensor> analytic;
    {
        auto value = loss();
        analytic = torch::autograd::grad({value}, params, {}, false, false, /*allow_unused=*/true);
    }
    std::vector<std::pair<std::size_t, int64_t>> coords;
    for (std::size_t i = 0; i < params.size(); ++i)
        for (int64_t j = 0; j < params[i].numel(); ++j) coords.emplace_back(i, j);
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (static_cast<int>(coords.size()) > samples) coords.resize(static_cast<std::size_t>(samples));

    auto eval = [&] { return loss().item<double>(); };
    GradCheckResult result;
    for (auto [i, j] : coords) {
        const double a = analytic[i].defined() ? analytic[i].reshape({-1})[j].item<double>() : 0.0;
        auto& p = params[i];
        const double n = central_difference(p, j, step, eval);
        const double err = relative_error(a, n);
        result.worst = std::max(result.worst, err);
        ++result.sampled;
        if (err < tolerance) ++result.passed;
    }
    return result;
}

}  // namespace pipgan::test
