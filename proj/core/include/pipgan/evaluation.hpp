#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pipgan/datamodel.hpp"

namespace pipgan {

inline constexpr double kPsnrCap = 99.0;

struct ImageMetrics {
    /// +inf for identical images.
    double psnr = 0;
    double mse = 0;
    double rmse = 0;
};

/// Peak 1.0; all channels scored jointly. Throws ShapeMismatch.
ImageMetrics image_metrics(const Image& generated, const Image& target);

struct PairMetrics {
    std::string pair_id;
    double psnr = 0;
    double mse = 0;
    double rmse = 0;
};

struct MetricsReport {
    std::vector<PairMetrics> per_image;
    /// Per-image values averaged; psnr is capped at kPsnrCap before averaging.
    ImageMetrics aggregate;
    std::size_t n_pairs = 0;
};

/// Aggregates per-image metrics (per-image-then-mean).
MetricsReport make_report(std::vector<PairMetrics> per_image);

/// Scores `generated_dir/id` against `target_dir/id` for every id in
/// `pair_ids` (file names). Throws MissingImage listing every missing id.
MetricsReport evaluate_pairs(const std::filesystem::path& generated_dir,
                             const std::filesystem::path& target_dir,
                             const std::vector<std::string>& pair_ids, int image_size = 0);

/// Reads pair ids from a one-column CSV with header `pair_id`; an empty path
/// lists every .png/.jpg in `generated_dir` in sorted order.
std::vector<std::string> read_pair_ids(const std::filesystem::path& manifest,
                                       const std::filesystem::path& generated_dir);

/// `pair_id,psnr_db,mse,rmse`.
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report_csv(const std::filesystem::path& path);

struct AblationTable {
    std::string csv;
    std::string markdown;
    std::string text;
};

/// The eight method labels in reporting order.
const std::vector<std::string>& ablation_methods();

/// One formatted CSV row: `Method,P-SNR,MSE,R-MSE` with 4/5/4 decimals.
std::string format_ablation_row(const std::string& method, const ImageMetrics& metrics);

/// Throws InvalidArgument on an empty list and DuplicateMethod on repeated names.
AblationTable ablation_report(const std::vector<std::pair<std::string, MetricsReport>>& entries);

}  // namespace pipgan
