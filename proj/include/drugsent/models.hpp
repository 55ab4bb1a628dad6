#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drugsent/bert.hpp"
#include "drugsent/encoders.hpp"
#include "drugsent/weights.hpp"

namespace drugsent {

enum class ModelKind {
    FrozenEncoderHead,
    CnnStatic,
    FinetuneGeneral,
    FinetuneClinical,
};

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_encoder_kind(ModelKind kind);

struct ModelConfig {
    ModelKind kind = ModelKind::CnnStatic;
    std::string checkpoint_id;               // encoder kinds
    int filters_per_width = 100;             // CNN: 50 or 100 per width
    std::vector<int> filter_widths = {1, 2, 3, 4, 5};
    int hidden_size = 100;
    int max_len = static_cast<int>(kDefaultMaxLen);
    int num_classes = 3;                     // fixed
    int trainable_encoder_layers = 4;        // 0 iff frozen baseline
    int embedding_dim = 0;                   // CNN; 0 = take from the table
    bool freeze_embeddings = false;          // CNN ablation flag
    double dropout = 0.0;
    std::uint64_t seed = 42;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct ClassDistribution {
    std::array<double, 3> probabilities{};

    int argmax() const;
};

// Flattened row-major batch ready for a forward pass.
struct EncodedBatch {
    std::vector<int> ids;                // batch * seq_len
    std::vector<std::uint8_t> mask;      // batch * seq_len
    std::vector<int> labels;             // batch
    std::size_t batch = 0;
    std::size_t seq_len = 0;
};

EncodedBatch make_batch(const std::vector<EncodedExample>& examples,
                        std::size_t begin, std::size_t end);

class Model {
  public:
    virtual ~Model() = default;

    const ModelConfig& config() const { return config_; }
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }

    std::size_t trainable_value_count() const;
    std::size_t encoder_trainable_value_count() const;

    // Builds 3-class logits (batch x 3). `training` enables dropout when
    // configured; `rng` is the stochastic source for it.
    virtual nn::Var logits(const EncodedBatch& batch, bool training,
                           std::mt19937_64* rng) = 0;

    // Encodes cleaned text with this model's own tokenizer family.
    virtual EncodedExample encode(const std::string& text,
                                  SentimentClass label) const = 0;

    // Writes the tokenizer/vocabulary assets next to saved weights so a
    // checkpoint directory is self-contained.
    virtual void save_assets(const std::filesystem::path& dir) const = 0;

  protected:
    explicit Model(ModelConfig config) : config_(std::move(config)) {}

    ModelConfig config_;
    std::vector<Parameter> params_;
};

// CNN over static word embeddings: trainable embedding lookup seeded from
// the table, parallel 1-D convolutions (one per filter width), global max
// pooling, concatenation, dense(hidden) + rectifier, linear classifier.
std::unique_ptr<Model> build_cnn(const ModelConfig& config,
                                 const StaticEmbeddingTable& table);

// Pretrained encoder, all encoder weights frozen; per-position dense over
// the final hidden states, masked global max pooling, linear classifier.
std::unique_ptr<Model> build_frozen_encoder_head(const ModelConfig& config);

// Same head; the top `trainable_encoder_layers` transformer blocks train,
// earlier blocks and embeddings stay frozen.
std::unique_ptr<Model> build_finetuned_encoder(const ModelConfig& config);

// Kind dispatch; `table` is required for the CNN.
std::unique_ptr<Model> build_model(
    const ModelConfig& config,
    const std::optional<StaticEmbeddingTable>& table = std::nullopt);

// checkpoint_id resolution: an existing path wins, otherwise
// $DRUGSENT_CHECKPOINTS/<id>.
std::filesystem::path resolve_checkpoint_dir(const std::string& checkpoint_id);

std::vector<ClassDistribution> predict_proba(
    Model& model, const std::vector<EncodedExample>& examples,
    std::size_t batch_size = 32);

std::vector<int> predict_classes(Model& model,
                                 const std::vector<EncodedExample>& examples,
                                 std::size_t batch_size = 32);

// Internal constructors used by checkpoint loading.
std::unique_ptr<Model> rebuild_cnn_skeleton(const ModelConfig& config,
                                            std::vector<std::string> tokens,
                                            std::size_t embedding_dim);
std::unique_ptr<Model> rebuild_encoder_skeleton(
    const ModelConfig& config, const std::filesystem::path& asset_dir);

} // namespace drugsent
