#include "pipgan/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pipgan/errors.hpp"

namespace pipgan {
namespace {

void check_image(const Image& image) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw ShapeMismatch("expected a [3, H, W] image, got " + std::to_string(image.dim()) + "-d tensor");
    }
}

}  // namespace

Image load_image(const std::filesystem::path& path, int size) {
    if (!std::filesystem::exists(path)) throw MissingImage("image not found: " + path.string());
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode image: " + path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);

    if (size > 0 && (rgb.cols != size || rgb.rows != size)) {
        const double scale = static_cast<double>(size) / std::min(rgb.cols, rgb.rows);
        const int w = std::max(size, static_cast<int>(std::lround(rgb.cols * scale)));
        const int h = std::max(size, static_cast<int>(std::lround(rgb.rows * scale)));
        cv::Mat resized;
        cv::resize(rgb, resized, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
        const cv::Rect crop((w - size) / 2, (h - size) / 2, size, size);
        rgb = resized(crop).clone();
    }
    std::vector<std::uint8_t> bytes(rgb.total() * 3);
    for (int y = 0; y < rgb.rows; ++y) {
        std::copy_n(rgb.ptr<std::uint8_t>(y), rgb.cols * 3, bytes.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
    }
    return from_rgb8(bytes, rgb.rows, rgb.cols);
}

std::vector<std::uint8_t> to_rgb8(const Image& image) {
    check_image(image);
    auto hwc = image.detach()
                   .to(torch::kFloat64)
                   .clamp(0.0, 1.0)
                   .mul(255.0)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
    const auto* data = hwc.data_ptr<std::uint8_t>();
    return {data, data + hwc.numel()};
}

Image from_rgb8(const std::vector<std::uint8_t>& rgb, int height, int width) {
    if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeMismatch("rgb buffer size does not match " + std::to_string(height) + "x" +
                            std::to_string(width));
    }
    auto hwc = torch::from_blob(const_cast<std::uint8_t*>(rgb.data()), {height, width, 3}, torch::kUInt8);
    return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

void save_png(const Image& image, const std::filesystem::path& path) {
    check_image(image);
    auto bytes = to_rgb8(image);
    const int h = static_cast<int>(image.size(1));
    const int w = static_cast<int>(image.size(2));
    cv::Mat rgb(h, w, CV_8UC3, bytes.data());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image: " + path.string());
}

Image tile_images(const std::vector<Image>& images, int rows, int cols) {
    if (rows < 1 || cols < 1 || images.size() != static_cast<std::size_t>(rows) * cols) {
        throw InvalidArgument("tile layout does not match the number of images");
    }
    check_image(images.front());
    const auto h = images.front().size(1);
    const auto w = images.front().size(2);
    constexpr int gap = 1;
    auto sheet = torch::ones({3, rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto& img = images[static_cast<std::size_t>(r) * cols + c];
            if (img.sizes() != images.front().sizes()) throw ShapeMismatch("tiles differ in shape");
            sheet.slice(1, r * (h + gap), r * (h + gap) + h)
                .slice(2, c * (w + gap), c * (w + gap) + w)
                .copy_(img.detach().to(torch::kFloat32));
        }
    }
    return sheet;
}

}  // namespace pipgan
