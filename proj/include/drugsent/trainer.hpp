#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "drugsent/models.hpp"

namespace drugsent {

// Loss is fixed: categorical cross-entropy.
struct TrainConfig {
    int epochs_max = 10;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int early_stop_patience = 3;
    double validation_fraction = 0.1; // stratified, carved from train
    std::uint64_t seed = 42;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// Reported convergence epochs per model family, used as ceilings; the
// frozen baseline has no reported count and follows the CNN's.
int default_epochs_max(ModelKind kind);
// 1e-3 for fresh parameters (CNN, frozen head), 2e-5 for fine-tuning.
double default_learning_rate(ModelKind kind);

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;     // NaN when no validation split
    double val_macro_f1 = 0.0; // NaN when no validation split
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int stopped_epoch = 0; // completed epochs, 1-based
    int best_epoch = 0;    // epoch whose parameters were kept
};

// Reseeds the process-global generator backing any source that was not
// given an explicit seed. Explicitly seeded sources (model init, sampling,
// shuffling) are unaffected and deterministic on their own.
void set_global_seed(std::uint64_t seed);

// Mini-batch Adam on cross-entropy with early stopping on validation macro
// F1; the model ends up with the best-validation-epoch parameters.
TrainHistory train(Model& model, const std::vector<EncodedExample>& examples,
                   const TrainConfig& config);

void write_history(const TrainHistory& history,
                   const std::filesystem::path& path);

// Checkpoint directory: weights.bin + manifest.txt + tokenizer assets, self
// contained for later evaluation.
void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const TrainConfig& train_config, int epochs_run,
                     const std::string& data_fingerprint);

struct CheckpointManifest {
    ModelConfig model;
    TrainConfig train;
    int epochs_run = 0;
    std::string data_fingerprint;
};

CheckpointManifest read_manifest(const std::filesystem::path& dir);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& dir);

} // namespace drugsent
