#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pipgan/config.hpp"
#include "pipgan/datamodel.hpp"
#include "pipgan/errors.hpp"

namespace pipgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags or flag combinations; mapped to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns the process exit code.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

/// Dataset description read from config keys `data.*` and `schema.*`.
struct DatasetInfo {
    std::filesystem::path manifest;
    AttributeSchema pose_schema;
    AttributeSchema expr_schema;
    int image_size = 0;
};

/// `config_dir` resolves a relative `data.manifest`.
DatasetInfo dataset_info(const Config& config, const std::filesystem::path& config_dir);

/// Which stage pairs to draw: the pose stage defaults to the neutral
/// expression, the expression stage to every pose (`stage.pairing`).
StageSpec stage_spec(const Config& config, Attribute attribute, const DatasetInfo& dataset);

/// Applies PIPGAN_CASCADE_WEIGHTS when set.
void apply_environment(Config& config);

/// Writes `resolved_config.toml` and `run_meta.json` into `out_dir`.
void write_run_metadata(const Config& config, const std::string& command, const std::filesystem::path& out_dir);

}  // namespace pipgan::cli
