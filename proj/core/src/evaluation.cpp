#include "pipgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "pipgan/errors.hpp"
#include "pipgan/image_io.hpp"

namespace pipgan {
namespace fs = std::filesystem;

ImageMetrics image_metrics(const Image& generated, const Image& target) {
    if (generated.sizes() != target.sizes()) throw ShapeMismatch("image_metrics: image shapes differ");
    auto diff = generated.detach().to(torch::kFloat64) - target.detach().to(torch::kFloat64);
    ImageMetrics m;
    m.mse = diff.pow(2).mean().item<double>();
    m.rmse = std::sqrt(m.mse);
    m.psnr = m.mse > 0.0 ? -10.0 * std::log10(m.mse) : std::numeric_limits<double>::infinity();
    return m;
}

MetricsReport make_report(std::vector<PairMetrics> per_image) {
    MetricsReport report;
    report.per_image = std::move(per_image);
    report.n_pairs = report.per_image.size();
    if (report.n_pairs == 0) return report;
    for (const auto& p : report.per_image) {
        report.aggregate.psnr += std::min(p.psnr, kPsnrCap);
        report.aggregate.mse += p.mse;
        report.aggregate.rmse += p.rmse;
    }
    const auto n = static_cast<double>(report.n_pairs);
    report.aggregate.psnr /= n;
    report.aggregate.mse /= n;
    report.aggregate.rmse /= n;
    return report;
}

MetricsReport evaluate_pairs(const fs::path& generated_dir, const fs::path& target_dir,
                             const std::vector<std::string>& pair_ids, int image_size) {
    std::vector<std::string> missing;
    for (const auto& id : pair_ids) {
        if (!fs::exists(generated_dir / id) || !fs::exists(target_dir / id)) missing.push_back(id);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw MissingImage("missing pairs: " + list);
    }
    std::vector<PairMetrics> per_image;
    for (const auto& id : pair_ids) {
        auto m = image_metrics(load_image(generated_dir / id, image_size), load_image(target_dir / id, image_size));
        per_image.push_back({id, m.psnr, m.mse, m.rmse});
    }
    return make_report(std::move(per_image));
}

std::vector<std::string> read_pair_ids(const fs::path& manifest, const fs::path& generated_dir) {
    std::vector<std::string> ids;
    if (manifest.empty()) {
        if (!fs::is_directory(generated_dir)) throw MissingFile("not a directory: " + generated_dir.string());
        for (const auto& entry : fs::directory_iterator(generated_dir)) {
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            if (entry.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) {
                ids.push_back(entry.path().filename().string());
            }
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    }
    std::ifstream in(manifest);
    if (!in) throw MissingFile("pair list not found: " + manifest.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("pair_id", 0) != 0) throw InvalidArgument("pair list must start with a pair_id header");
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto comma = line.find(',');
        if (comma != std::string::npos) line = line.substr(0, comma);
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

void write_report_csv(const MetricsReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << "pair_id,psnr_db,mse,rmse\n";
    char buf[128];
    for (const auto& p : report.per_image) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", p.psnr, p.mse, p.rmse);
        out << p.pair_id << buf;
    }
}

MetricsReport read_report_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("report not found: " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("pair_id,psnr_db,mse,rmse", 0) != 0) throw InvalidArgument("not a metrics report: " + path.string());
    std::vector<PairMetrics> per_image;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, psnr, mse, rmse;
        std::getline(ss, id, ',');
        std::getline(ss, psnr, ',');
        std::getline(ss, mse, ',');
        std::getline(ss, rmse, ',');
        try {
            per_image.push_back({id, std::stod(psnr), std::stod(mse), std::stod(rmse)});
        } catch (const std::exception&) {
            throw InvalidArgument("malformed report line in " + path.string() + ": " + line);
        }
    }
    return make_report(std::move(per_image));
}

const std::vector<std::string>& ablation_methods() {
    static const std::vector<std::string> methods = {
        "Ours", "PE + Cascade +GP", "PE + Cascade", "PE + GP", "PE", "EP+GP", "EP", "Pix2pix"};
    return methods;
}

namespace {

struct Cells {
    std::string psnr, mse, rmse;
};

Cells format_cells(const ImageMetrics& m) {
    char psnr[32], mse[32], rmse[32];
    std::snprintf(psnr, sizeof psnr, "%.4f", std::min(m.psnr, kPsnrCap));
    std::snprintf(mse, sizeof mse, "%.5f", m.mse);
    std::snprintf(rmse, sizeof rmse, "%.4f", m.rmse);
    return {psnr, mse, rmse};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::string format_ablation_row(const std::string& method, const ImageMetrics& metrics) {
    auto c = format_cells(metrics);
    return csv_field(method) + "," + c.psnr + "," + c.mse + "," + c.rmse;
}

AblationTable ablation_report(const std::vector<std::pair<std::string, MetricsReport>>& entries) {
    if (entries.empty()) throw InvalidArgument("ablation report needs at least one method");
    std::set<std::string> seen;
    for (const auto& [name, report] : entries) {
        if (!seen.insert(name).second) throw DuplicateMethod("duplicate method name '" + name + "'");
    }

    AblationTable table;
    table.csv = "Method,P-SNR,MSE,R-MSE\n";
    table.markdown = "| Method | P-SNR | MSE | R-MSE |\n|---|---|---|---|\n";
    std::vector<std::vector<std::string>> rows = {{"Method", "P-SNR", "MSE", "R-MSE"}};
    for (const auto& [name, report] : entries) {
        auto c = format_cells(report.aggregate);
        table.csv += format_ablation_row(name, report.aggregate) + "\n";
        table.markdown += "| " + name + " | " + c.psnr + " | " + c.mse + " | " + c.rmse + " |\n";
        rows.push_back({name, c.psnr, c.mse, c.rmse});
    }
    std::vector<std::size_t> width(4, 0);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t i = 0; i < 4; ++i) {
            const auto pad = std::string(width[i] - row[i].size(), ' ');
            line += i == 0 ? row[i] + pad : "  " + pad + row[i];
        }
        table.text += line + "\n";
    }
    return table;
}

}  // namespace pipgan
