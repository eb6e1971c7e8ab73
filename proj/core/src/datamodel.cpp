#include "pipgan/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "pipgan/errors.hpp"
#include "pipgan/image_io.hpp"
#include "pipgan/logging.hpp"

namespace pipgan {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

}  // namespace

std::string to_string(Attribute attribute) {
    return attribute == Attribute::pose ? "pose" : "expression";
}

Attribute parse_attribute(const std::string& name) {
    if (name == "pose") return Attribute::pose;
    if (name == "expression" || name == "expr") return Attribute::expression;
    throw InvalidArgument("unknown attribute '" + name + "' (expected pose or expression)");
}

int AttributeSchema::index_of(const std::string& category) const {
    auto it = std::find(categories.begin(), categories.end(), category);
    if (it == categories.end()) {
        throw UnknownCategory("category '" + category + "' is not in schema '" + name + "'");
    }
    return static_cast<int>(it - categories.begin());
}

void AttributeSchema::validate() const {
    if (categories.empty()) throw InvalidArgument("schema '" + name + "' has no categories");
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size()) {
        throw InvalidArgument("schema '" + name + "' has repeated categories");
    }
    if (neutral_index < 0 || neutral_index >= size()) {
        throw InvalidArgument("schema '" + name + "' neutral index out of range");
    }
}

AttributeSchema AttributeSchema::kdef_pose() {
    return {"pose", {"full_left", "half_left", "straight", "half_right", "full_right"}, 2};
}

AttributeSchema AttributeSchema::kdef_expression() {
    return {"expression", {"afraid", "angry", "disgusted", "happy", "neutral", "sad", "surprised"}, 4};
}

AttributeSchema AttributeSchema::numbered(std::string name, std::string prefix, int k, int neutral_index) {
    AttributeSchema schema{std::move(name), {}, neutral_index};
    for (int i = 0; i < k; ++i) schema.categories.push_back(prefix + std::to_string(i));
    return schema;
}

ConditionVector ConditionVector::one_hot(int k, int dim) {
    if (dim < 1 || k < 0 || k >= dim) {
        throw InvalidArgument("one-hot index " + std::to_string(k) + " outside [0, " +
                              std::to_string(dim) + ")");
    }
    return {k, dim};
}

torch::Tensor ConditionVector::encoding(torch::Dtype dtype) const {
    auto v = torch::zeros({dim}, torch::TensorOptions().dtype(dtype));
    v[k] = 1;
    return v;
}

torch::Tensor stack_conditions(const std::vector<ConditionVector>& conditions, torch::Dtype dtype) {
    if (conditions.empty()) throw InvalidArgument("no conditions to stack");
    const int dim = conditions.front().dim;
    auto out = torch::zeros({static_cast<int64_t>(conditions.size()), dim},
                            torch::TensorOptions().dtype(dtype));
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (conditions[i].dim != dim) throw ShapeMismatch("conditions of mixed dimension in one batch");
        out[static_cast<int64_t>(i)][conditions[i].k] = 1;
    }
    return out;
}

void SynthSpec::validate() const {
    if (n_subjects < 2 || k_pose < 2 || k_expr < 2) {
        throw InvalidArgument("synthetic dataset counts must be >= 2");
    }
    if (image_size < 16 || (image_size & (image_size - 1)) != 0) {
        throw InvalidArgument("synthetic image size must be a power of two >= 16, got " +
                              std::to_string(image_size));
    }
}

AttributeSchema SynthSpec::pose_schema() const {
    if (k_pose == 5) return AttributeSchema::kdef_pose();
    return AttributeSchema::numbered("pose", "pose", k_pose, k_pose / 2);
}

AttributeSchema SynthSpec::expression_schema() const {
    if (k_expr == 7) return AttributeSchema::kdef_expression();
    return AttributeSchema::numbered("expression", "expr", k_expr, 0);
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path,
                                       const AttributeSchema& pose_schema,
                                       const AttributeSchema& expr_schema) {
    pose_schema.validate();
    expr_schema.validate();
    std::ifstream in(path);
    if (!in) throw MissingFile("manifest not found: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("manifest is empty (header required): " + path.string());
    if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"subject_id", "pose", "expression", "path"}) {
        throw InvalidArgument("manifest header must be subject_id,pose,expression,path");
    }

    const auto root = path.parent_path();
    std::vector<ManifestRow> rows;
    std::set<std::tuple<std::string, int, int>> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 4) {
            throw InvalidArgument("manifest line " + std::to_string(line_no) + ": expected 4 fields");
        }
        ManifestRow row;
        row.subject_id = fields[0];
        row.pose = pose_schema.index_of(fields[1]);
        row.expression = expr_schema.index_of(fields[2]);
        std::filesystem::path rel(fields[3]);
        row.path = rel.is_absolute() ? rel : root / rel;
        if (!seen.emplace(row.subject_id, row.pose, row.expression).second) {
            throw DuplicateRow("duplicate manifest row for (" + row.subject_id + ", " + fields[1] +
                               ", " + fields[2] + ")");
        }
        if (!std::filesystem::exists(row.path)) {
            throw MissingImage("image listed in manifest does not exist: " + row.path.string());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows,
                    const AttributeSchema& pose_schema, const AttributeSchema& expr_schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << "subject_id,pose,expression,path\n";
    const auto root = std::filesystem::absolute(path).parent_path();
    for (const auto& row : rows) {
        auto rel = std::filesystem::absolute(row.path).lexically_normal().lexically_relative(root.lexically_normal());
        out << row.subject_id << ',' << pose_schema.categories.at(row.pose) << ','
            << expr_schema.categories.at(row.expression) << ',' << rel.generic_string() << '\n';
    }
}

std::vector<std::string> subject_ids(const std::vector<ManifestRow>& rows) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& row : rows) {
        if (seen.insert(row.subject_id).second) ids.push_back(row.subject_id);
    }
    return ids;
}

std::vector<SampleRecord> pair_for_stage(const std::vector<ManifestRow>& rows,
                                         const AttributeSchema& pose_schema,
                                         const AttributeSchema& expr_schema, const StageSpec& stage,
                                         int image_size) {
    const auto& varying_schema = stage.varying == Attribute::pose ? pose_schema : expr_schema;
    const auto& other_schema = stage.varying == Attribute::pose ? expr_schema : pose_schema;
    const Attribute other = stage.varying == Attribute::pose ? Attribute::expression : Attribute::pose;
    const int k = varying_schema.size();
    const int neutral = varying_schema.neutral_index;

    // (subject, other value) -> varying index -> row
    std::map<std::pair<std::string, int>, std::map<int, const ManifestRow*>> groups;
    for (const auto& row : rows) {
        const int o = row.index(other);
        if (stage.fixed_other && o != *stage.fixed_other) continue;
        groups[{row.subject_id, o}][row.index(stage.varying)] = &row;
    }

    std::vector<std::string> missing_source;
    for (const auto& [key, by_category] : groups) {
        if (!by_category.count(neutral)) missing_source.push_back(key.first);
    }
    if (!missing_source.empty()) {
        missing_source.erase(std::unique(missing_source.begin(), missing_source.end()),
                             missing_source.end());
        throw MissingSource("subjects missing the neutral " + to_string(stage.varying) +
                            " source image: " + join(missing_source, ", "));
    }

    std::map<std::filesystem::path, Image> cache;
    auto image_for = [&](const ManifestRow& row) -> const Image& {
        auto it = cache.find(row.path);
        if (it == cache.end()) it = cache.emplace(row.path, load_image(row.path, image_size)).first;
        return it->second;
    };

    std::vector<SampleRecord> records;
    for (const auto& subject : subject_ids(rows)) {
        for (int o = 0; o < other_schema.size(); ++o) {
            auto group = groups.find({subject, o});
            if (group == groups.end()) continue;
            const auto& by_category = group->second;
            const auto& source = image_for(*by_category.at(neutral));
            for (int c = 0; c < k; ++c) {
                if (c == neutral && !stage.include_identity) continue;
                auto target = by_category.find(c);
                if (target == by_category.end()) {
                    log_warning("subject " + subject + " has no " + varying_schema.categories[c] +
                                " image at " + other_schema.name + "=" + other_schema.categories[o] +
                                "; pair skipped");
                    continue;
                }
                SampleRecord record;
                record.input = source;
                record.target = image_for(*target->second);
                record.condition = ConditionVector::one_hot(c, k);
                record.subject_id = subject;
                record.other_index = o;
                records.push_back(std::move(record));
            }
        }
    }
    return records;
}

std::pair<std::vector<ManifestRow>, std::vector<ManifestRow>> split_subjects(
    const std::vector<ManifestRow>& rows, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must lie in (0, 1)");
    auto ids = subject_ids(rows);
    if (ids.size() < 2) throw InvalidArgument("need at least 2 subjects to split");
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own index draw so the partition does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        std::size_t j = rng() % (i + 1);
        std::swap(ids[i], ids[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
    std::set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::pair<std::vector<ManifestRow>, std::vector<ManifestRow>> out;
    for (const auto& row : rows) {
        (train_ids.count(row.subject_id) ? out.first : out.second).push_back(row);
    }
    return out;
}

}  // namespace pipgan
