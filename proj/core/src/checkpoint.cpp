#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pipgan/errors.hpp"
#include "pipgan/training.hpp"

namespace pipgan {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

torch::Tensor bytes_tensor(const std::string& s) {
    auto t = torch::empty({static_cast<int64_t>(s.size())}, torch::kUInt8);
    std::memcpy(t.data_ptr(), s.data(), s.size());
    return t;
}

std::string tensor_bytes(const torch::Tensor& t) {
    auto c = t.contiguous();
    return {static_cast<const char*>(c.data_ptr()), static_cast<std::size_t>(c.numel())};
}

}  // namespace

CheckpointMeta make_meta(const TrainState& state, const std::vector<MetricSnapshot>& history) {
    CheckpointMeta meta;
    meta.stage_name = state.config.stage_name;
    meta.attribute = state.config.attribute;
    meta.schema = state.config.schema;
    meta.image_size = state.config.network.image_size;
    meta.steps = state.step;
    meta.config = state.config.to_config();
    meta.config_hash = meta.config.hash();
    meta.history = history;
    return meta;
}

void save_checkpoint(const TrainState& state, const CheckpointMeta& meta, const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + path.string() + ": " + ec.message());

    torch::serialize::OutputArchive root;
    torch::serialize::OutputArchive generator, discriminator, opt_g, opt_d;
    state.generator->save(generator);
    state.critic.discriminator->save(discriminator);
    state.generator_optimizer->save(opt_g);
    state.discriminator_optimizer->save(opt_d);
    root.write("generator", generator);
    root.write("discriminator", discriminator);
    root.write("generator_optimizer", opt_g);
    root.write("discriminator_optimizer", opt_d);
    root.write("step", torch::tensor(static_cast<int64_t>(state.step)));
    root.write("rng_state", state.rng.get_state());
    std::ostringstream batch_rng;
    batch_rng << state.batch_rng;
    root.write("batch_rng", bytes_tensor(batch_rng.str()));
    root.save_to((path / "state.pt").string());

    json j;
    j["version"] = meta.version;
    j["stage_name"] = meta.stage_name;
    j["attribute"] = to_string(meta.attribute);
    j["schema"] = {{"name", meta.schema.name},
                   {"categories", meta.schema.categories},
                   {"neutral_index", meta.schema.neutral_index}};
    j["image_size"] = meta.image_size;
    j["steps"] = meta.steps;
    j["config"] = meta.config.entries();
    j["config_hash"] = meta.config_hash;
    j["history"] = json::array();
    for (const auto& h : meta.history) {
        j["history"].push_back({{"step", h.step}, {"l1", h.l1}, {"psnr", h.psnr}, {"mse", h.mse}, {"rmse", h.rmse}});
    }
    std::ofstream out(path / "meta.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (path / "meta.json").string());
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& path, const std::optional<AttributeSchema>& expected_schema) {
    const auto meta_path = path / "meta.json";
    const auto state_path = path / "state.pt";
    if (!fs::exists(meta_path) || !fs::exists(state_path)) {
        throw MissingFile("checkpoint not found (need meta.json and state.pt): " + path.string());
    }

    CheckpointMeta meta;
    try {
        std::ifstream in(meta_path);
        const auto j = json::parse(in);
        meta.version = j.at("version").get<int>();
        if (meta.version != kCheckpointVersion) {
            throw VersionMismatch("checkpoint " + path.string() + " has format version " +
                                  std::to_string(meta.version) + ", expected " + std::to_string(kCheckpointVersion));
        }
        meta.stage_name = j.at("stage_name").get<std::string>();
        meta.attribute = parse_attribute(j.at("attribute").get<std::string>());
        meta.schema.name = j.at("schema").at("name").get<std::string>();
        meta.schema.categories = j.at("schema").at("categories").get<std::vector<std::string>>();
        meta.schema.neutral_index = j.at("schema").at("neutral_index").get<int>();
        meta.image_size = j.at("image_size").get<int>();
        meta.steps = j.at("steps").get<long>();
        for (const auto& [key, value] : j.at("config").items()) meta.config.set(key, value.get<std::string>());
        meta.config_hash = j.at("config_hash").get<std::string>();
        for (const auto& h : j.at("history")) {
            meta.history.push_back({h.at("step").get<long>(), h.at("l1").get<double>(), h.at("psnr").get<double>(),
                                    h.at("mse").get<double>(), h.at("rmse").get<double>()});
        }
    } catch (const json::exception& e) {
        throw CorruptCheckpoint("malformed meta.json in " + path.string() + ": " + e.what());
    }

    if (expected_schema && *expected_schema != meta.schema) {
        throw SchemaMismatch("checkpoint " + path.string() + " has schema '" + meta.schema.name + "' with " +
                             std::to_string(meta.schema.size()) + " categories, expected '" + expected_schema->name +
                             "' with " + std::to_string(expected_schema->size()));
    }
    if (meta.config.hash() != meta.config_hash) {
        throw CorruptCheckpoint("config hash mismatch in " + meta_path.string());
    }

    auto config = TrainConfig::from_config(meta.config);
    if (config.schema != meta.schema) throw CorruptCheckpoint("schema in meta.json disagrees with its config");
    Checkpoint checkpoint{TrainState::create(config), meta};
    auto& state = checkpoint.state;
    try {
        torch::serialize::InputArchive root;
        root.load_from(state_path.string());
        torch::serialize::InputArchive generator, discriminator, opt_g, opt_d;
        root.read("generator", generator);
        root.read("discriminator", discriminator);
        root.read("generator_optimizer", opt_g);
        root.read("discriminator_optimizer", opt_d);
        state.generator->load(generator);
        state.critic.discriminator->load(discriminator);
        state.generator_optimizer->load(opt_g);
        state.discriminator_optimizer->load(opt_d);
        torch::Tensor step, rng_state, batch_rng;
        root.read("step", step);
        root.read("rng_state", rng_state);
        root.read("batch_rng", batch_rng);
        state.step = step.item<int64_t>();
        state.rng.set_state(rng_state);
        std::istringstream rng_in(tensor_bytes(batch_rng));
        rng_in >> state.batch_rng;
    } catch (const c10::Error& e) {
        throw CorruptCheckpoint("cannot read " + state_path.string() + ": " + e.what_without_backtrace());
    }
    return checkpoint;
}

}  // namespace pipgan
