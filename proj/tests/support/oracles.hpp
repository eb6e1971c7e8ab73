#pragma once

// Reference implementations used only by tests. Everything here works on
// plain std::vector<double> with explicit loops so it shares no code path
// with the tensor implementations it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <torch/torch.h>

namespace pipgan::test {

inline std::vector<double> to_vector(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat64).contiguous();
    const double* p = c.data_ptr<double>();
    return {p, p + c.numel()};
}

struct MetricTriple {
    double psnr, mse, rmse;
};

/// Triple loop over channel, row, column.
inline MetricTriple metrics_oracle(const std::vector<double>& a, const std::vector<double>& b, int channels,
                                   int height, int width) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t i = (static_cast<std::size_t>(c) * height + y) * width + x;
                const double d = a[i] - b[i];
                sum += d * d;
            }
        }
    }
    const double mse = sum / (static_cast<double>(channels) * height * width);
    const double psnr = mse > 0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
    return {psnr, mse, std::sqrt(mse)};
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Elementwise sigmoid cross entropy: real maps labelled 1, fake maps 0.
inline double d_loss_oracle(const std::vector<double>& real, const std::vector<double>& fake) {
    double r = 0.0, f = 0.0;
    for (double z : real) r += -std::log(std::max(sigmoid(z), 1e-7));
    for (double z : fake) f += -std::log(std::max(1.0 - sigmoid(z), 1e-7));
    return r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size());
}

inline double g_loss_oracle(const std::vector<double>& fake) {
    double f = 0.0;
    for (double z : fake) f += -std::log(std::max(sigmoid(z), 1e-7));
    return f / static_cast<double>(fake.size());
}

/// -log softmax(logits)[label] computed by direct exponentiation.
inline double cross_entropy_oracle(const std::vector<double>& logits, int label) {
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z);
    return -std::log(std::exp(logits[static_cast<std::size_t>(label)]) / denom);
}

inline double mean_abs_diff_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// out[r] = sum_c w[r][c] * x[c] + bias[r]; w row-major rows x cols.
inline std::vector<double> matvec_oracle(const std::vector<double>& w, const std::vector<double>& x,
                                         const std::vector<double>& bias) {
    const std::size_t rows = bias.size();
    const std::size_t cols = x.size();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = bias[r];
        for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
        out[r] = s;
    }
    return out;
}

/// Central difference of f along coordinate `index` of `param` (modified in
/// place and restored). f runs with autograd enabled so it may differentiate
/// internally.
inline double central_difference(torch::Tensor& param, int64_t index, double step,
                                 const std::function<double()>& f) {
    auto set = [&](double v) {
        torch::NoGradGuard guard;
        param.view({-1})[index].fill_(v);
    };
    const double original = param.detach().view({-1})[index].item<double>();
    set(original + step);
    const double plus = f();
    set(original - step);
    const double minus = f();
    set(original);
    return (plus - minus) / (2.0 * step);
}

inline double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    return std::abs(analytic - numeric) / scale;
}

}  // namespace pipgan::test
