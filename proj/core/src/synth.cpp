#include <cmath>
#include <cstdio>
#include <fstream>

#include "pipgan/datamodel.hpp"
#include "pipgan/errors.hpp"
#include "pipgan/image_io.hpp"

namespace pipgan {
namespace {

constexpr int kSupersample = 4;

// SplitMix64; used instead of <random> distributions so renders are identical
// across standard library implementations.
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
};

struct Rgb {
    double r, g, b;
};

struct SubjectLook {
    Rgb face;
    Rgb features;
    double radius_x, radius_y;
    double eye_dx, eye_y, eye_r;
    double mouth_y, mouth_w;
};

SubjectLook subject_look(const SynthSpec& spec, int subject) {
    SplitMix rng{spec.seed * 0x100000001B3ULL + static_cast<std::uint64_t>(subject) + 1};
    const double s = spec.image_size;
    SubjectLook look{};
    look.face = {rng.uniform(120, 255), rng.uniform(120, 255), rng.uniform(120, 255)};
    look.features = {rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(0, 60)};
    look.radius_x = s * rng.uniform(0.24, 0.30);
    look.radius_y = s * rng.uniform(0.30, 0.36);
    look.eye_dx = s * rng.uniform(0.09, 0.12);
    look.eye_y = -s * rng.uniform(0.08, 0.12);
    look.eye_r = s * rng.uniform(0.045, 0.06);
    look.mouth_y = s * rng.uniform(0.12, 0.16);
    look.mouth_w = s * rng.uniform(0.10, 0.14);
    return look;
}

const Rgb kBackground{32, 32, 40};
const Rgb kMouth{150, 20, 30};

}  // namespace

std::vector<std::uint8_t> render_glyph(const SynthSpec& spec, int subject, int pose, int expression) {
    const auto look = subject_look(spec, subject);
    const int size = spec.image_size;
    const double s = size;
    const int pose_offset = pose - spec.pose_schema().neutral_index;
    const double center_x = s / 2.0 + pose_offset * (s / 16.0);
    const double center_y = s / 2.0;
    const double shear = 0.15 * pose_offset;
    // Mouth curvature spans [-1, 1] over the expression categories.
    const double curvature = -1.0 + 2.0 * expression / (spec.k_expr - 1);
    const double thickness = std::max(1.0, s * 0.035);

    auto shade = [&](double x, double y) -> Rgb {
        // Glyph-local coordinates with the shear undone.
        const double v = y - center_y;
        const double u = x - center_x - shear * v;
        const double e = (u * u) / (look.radius_x * look.radius_x) + (v * v) / (look.radius_y * look.radius_y);
        if (e > 1.0) return kBackground;
        for (double side : {-1.0, 1.0}) {
            const double du = u - side * look.eye_dx;
            const double dv = v - look.eye_y;
            if (du * du + dv * dv <= look.eye_r * look.eye_r) return look.features;
            // Brows tilt with the expression.
            const double brow_v = look.eye_y - 2.2 * look.eye_r - side * curvature * 0.5 * (du / look.eye_r) * look.eye_r;
            if (std::abs(du) <= 1.6 * look.eye_r && std::abs(v - brow_v) <= thickness * 0.5) return look.features;
        }
        const double t = u / look.mouth_w;
        if (std::abs(t) <= 1.0) {
            const double arc = look.mouth_y - curvature * 0.12 * s * (1.0 - t * t);
            if (std::abs(v - arc) <= thickness * 0.5 + 0.5) return kMouth;
        }
        return look.face;
    };

    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(size) * size * 3);
    constexpr double inv = 1.0 / (kSupersample * kSupersample);
    for (int py = 0; py < size; ++py) {
        for (int px = 0; px < size; ++px) {
            double r = 0, g = 0, b = 0;
            for (int sy = 0; sy < kSupersample; ++sy) {
                for (int sx = 0; sx < kSupersample; ++sx) {
                    const auto c = shade(px + (sx + 0.5) / kSupersample, py + (sy + 0.5) / kSupersample);
                    r += c.r;
                    g += c.g;
                    b += c.b;
                }
            }
            auto* out = &rgb[(static_cast<std::size_t>(py) * size + px) * 3];
            out[0] = static_cast<std::uint8_t>(std::lround(r * inv));
            out[1] = static_cast<std::uint8_t>(std::lround(g * inv));
            out[2] = static_cast<std::uint8_t>(std::lround(b * inv));
        }
    }
    return rgb;
}

std::filesystem::path synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

    const auto pose_schema = spec.pose_schema();
    const auto expr_schema = spec.expression_schema();
    std::vector<ManifestRow> rows;
    char name[64];
    for (int subject = 0; subject < spec.n_subjects; ++subject) {
        std::snprintf(name, sizeof name, "s%02d", subject);
        const std::string subject_id = name;
        for (int p = 0; p < spec.k_pose; ++p) {
            for (int e = 0; e < spec.k_expr; ++e) {
                std::snprintf(name, sizeof name, "images/%s_p%d_e%d.png", subject_id.c_str(), p, e);
                const auto path = out_dir / name;
                save_png(from_rgb8(render_glyph(spec, subject, p, e), spec.image_size, spec.image_size), path);
                rows.push_back({subject_id, p, e, path});
            }
        }
    }
    const auto manifest = out_dir / "manifest.csv";
    write_manifest(manifest, rows, pose_schema, expr_schema);

    auto join = [](const std::vector<std::string>& items) {
        std::string out;
        for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
        return out;
    };
    std::ofstream cfg(out_dir / "dataset.toml", std::ios::binary);
    if (!cfg) throw IoError("cannot write dataset.toml in " + out_dir.string());
    cfg << "[data]\n"
        << "manifest = \"manifest.csv\"\n"
        << "image_size = " << spec.image_size << "\n\n"
        << "[schema]\n"
        << "pose = \"" << join(pose_schema.categories) << "\"\n"
        << "pose_neutral = " << pose_schema.neutral_index << "\n"
        << "expression = \"" << join(expr_schema.categories) << "\"\n"
        << "expression_neutral = " << expr_schema.neutral_index << "\n\n"
        << "[synth]\n"
        << "subjects = " << spec.n_subjects << "\n"
        << "poses = " << spec.k_pose << "\n"
        << "exprs = " << spec.k_expr << "\n"
        << "seed = " << spec.seed << "\n";
    return manifest;
}

}  // namespace pipgan
