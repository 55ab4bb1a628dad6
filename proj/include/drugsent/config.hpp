#pragma once

#include <filesystem>
#include <string>

#include "drugsent/corpus.hpp"
#include "drugsent/models.hpp"
#include "drugsent/trainer.hpp"

namespace drugsent {

// Run configuration, parsed from a "dotted.key = value" text file. Unknown
// keys are rejected; defaults (some model-kind dependent) are applied at
// parse time and the resolved config is echoed into the run directory.
struct RunConfig {
    std::string train_file;
    std::string test_file;
    double fraction = 1.0; // prepare-time stratified subsample
    std::uint64_t data_seed = 42;
    BadRowPolicy on_bad_row = BadRowPolicy::Abort;

    ModelConfig model;
    std::string embeddings_file; // CNN word2vec file

    TrainConfig train;
    std::string output_dir;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::filesystem::path& path);

// Canonical rendering of the fully resolved config; parsing it back yields
// an identical RunConfig.
std::string render_config(const RunConfig& config);
void write_resolved_config(const RunConfig& config,
                           const std::filesystem::path& path);

} // namespace drugsent
