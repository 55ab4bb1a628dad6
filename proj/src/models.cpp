#include "drugsent/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

using nn::Shape;
using nn::Tensor;
using nn::Var;

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::FrozenEncoderHead: return "frozen_encoder_head";
    case ModelKind::CnnStatic: return "cnn_static";
    case ModelKind::FinetuneGeneral: return "finetune_general";
    case ModelKind::FinetuneClinical: return "finetune_clinical";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "frozen_encoder_head") return ModelKind::FrozenEncoderHead;
    if (name == "cnn_static") return ModelKind::CnnStatic;
    if (name == "finetune_general") return ModelKind::FinetuneGeneral;
    if (name == "finetune_clinical") return ModelKind::FinetuneClinical;
    throw UsageError("unknown model kind: \"" + name + "\"");
}

bool is_encoder_kind(ModelKind kind) { return kind != ModelKind::CnnStatic; }

void ModelConfig::validate() const {
    if (num_classes != 3) {
        throw UsageError("num_classes is fixed at 3");
    }
    if (max_len < 2) {
        throw UsageError("max_len must be at least 2");
    }
    if (hidden_size < 1) {
        throw UsageError("hidden_size must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw UsageError("dropout must be in [0,1)");
    }
    if (kind == ModelKind::CnnStatic) {
        if (filters_per_width < 1) {
            throw UsageError("filters_per_width must be positive");
        }
        if (filter_widths.empty()) {
            throw UsageError("at least one filter width is required");
        }
        for (int w : filter_widths) {
            if (w < 1 || w > max_len) {
                throw UsageError("filter width " + std::to_string(w) +
                                 " outside [1, max_len=" +
                                 std::to_string(max_len) + "]");
            }
        }
    } else {
        const bool frozen = kind == ModelKind::FrozenEncoderHead;
        if (frozen && trainable_encoder_layers != 0) {
            throw UsageError("frozen_encoder_head requires "
                             "trainable_encoder_layers == 0");
        }
        if (!frozen && trainable_encoder_layers < 1) {
            throw UsageError(std::string(to_string(kind)) +
                             " requires trainable_encoder_layers >= 1");
        }
    }
}

int ClassDistribution::argmax() const {
    int best = 0;
    for (int c = 1; c < 3; ++c) {
        if (probabilities[c] > probabilities[best]) best = c;
    }
    return best;
}

EncodedBatch make_batch(const std::vector<EncodedExample>& examples,
                        std::size_t begin, std::size_t end) {
    if (begin >= end || end > examples.size()) {
        throw std::invalid_argument("bad batch range");
    }
    EncodedBatch b;
    b.batch = end - begin;
    b.seq_len = examples[begin].max_len();
    b.ids.reserve(b.batch * b.seq_len);
    b.mask.reserve(b.batch * b.seq_len);
    for (std::size_t i = begin; i < end; ++i) {
        const EncodedExample& ex = examples[i];
        if (ex.max_len() != b.seq_len) {
            throw TrainError("mixed sequence lengths in one batch");
        }
        b.ids.insert(b.ids.end(), ex.token_ids.begin(), ex.token_ids.end());
        b.mask.insert(b.mask.end(), ex.attention_mask.begin(),
                      ex.attention_mask.end());
        b.labels.push_back(static_cast<int>(ex.label));
    }
    return b;
}

std::size_t Model::trainable_value_count() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) {
        if (p.var.requires_grad()) n += p.var.value().numel();
    }
    return n;
}

std::size_t Model::encoder_trainable_value_count() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) {
        if (starts_with(p.name, "encoder.") && p.var.requires_grad()) {
            n += p.var.value().numel();
        }
    }
    return n;
}

namespace {

Tensor glorot_uniform(const Shape& shape, std::mt19937_64& rng) {
    double fan_in = 1.0, fan_out = 1.0;
    if (shape.size() == 2) {
        fan_in = static_cast<double>(shape[0]);
        fan_out = static_cast<double>(shape[1]);
    } else if (shape.size() == 3) { // conv (F, K, D)
        fan_in = static_cast<double>(shape[1] * shape[2]);
        fan_out = static_cast<double>(shape[0]);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    return nn::uniform_init(shape, -limit, limit, rng);
}

// ---------------------------------------------------------------------------
// CNN over static embeddings
// ---------------------------------------------------------------------------

class CnnStaticModel final : public Model {
  public:
    CnnStaticModel(ModelConfig config, std::vector<std::string> tokens,
                   Tensor embedding_matrix)
        : Model(std::move(config)), tokens_(std::move(tokens)) {
        const std::size_t dim = embedding_matrix.dim(1);
        config_.embedding_dim = static_cast<int>(dim); // recorded in manifests
        std::mt19937_64 rng(config_.seed);

        embedding_ = Var(std::move(embedding_matrix),
                         !config_.freeze_embeddings);
        params_.push_back({"embedding.weight", embedding_});
        for (int w : config_.filter_widths) {
            ConvBlock block;
            block.width = static_cast<std::size_t>(w);
            block.weight = Var(
                glorot_uniform({static_cast<std::size_t>(
                                    config_.filters_per_width),
                                block.width, dim},
                               rng),
                true);
            block.bias = Var(
                Tensor({static_cast<std::size_t>(config_.filters_per_width)}),
                true);
            const std::string p = "conv.w" + std::to_string(w);
            params_.push_back({p + ".weight", block.weight});
            params_.push_back({p + ".bias", block.bias});
            convs_.push_back(std::move(block));
        }
        const std::size_t pooled =
            static_cast<std::size_t>(config_.filters_per_width) *
            convs_.size();
        const std::size_t hidden =
            static_cast<std::size_t>(config_.hidden_size);
        dense_w_ = Var(glorot_uniform({pooled, hidden}, rng), true);
        dense_b_ = Var(Tensor({hidden}), true);
        clf_w_ = Var(glorot_uniform({hidden, 3}, rng), true);
        clf_b_ = Var(Tensor({3}), true);
        params_.push_back({"head.dense.weight", dense_w_});
        params_.push_back({"head.dense.bias", dense_b_});
        params_.push_back({"head.classifier.weight", clf_w_});
        params_.push_back({"head.classifier.bias", clf_b_});

        vocabulary_.reserve(tokens_.size());
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            vocabulary_.emplace(tokens_[i], static_cast<int>(i));
        }
        pad_index_ = static_cast<int>(tokens_.size());
        unk_index_ = static_cast<int>(tokens_.size() + 1);
    }

    Var logits(const EncodedBatch& batch, bool training,
               std::mt19937_64* rng) override {
        Var x = nn::embedding_rows(embedding_, batch.ids,
                                   {batch.batch, batch.seq_len});
        std::vector<Var> pooled;
        pooled.reserve(convs_.size());
        for (const ConvBlock& block : convs_) {
            Var conv = nn::conv1d_valid(x, block.weight, block.bias);
            pooled.push_back(nn::max_over_time(conv, nullptr));
        }
        Var features = pooled.size() == 1 ? pooled[0]
                                          : nn::concat_lastdim(pooled);
        Var hidden =
            nn::relu(nn::add(nn::matmul(features, dense_w_), dense_b_));
        if (training && config_.dropout > 0.0 && rng) {
            hidden = nn::dropout(hidden, config_.dropout, *rng);
        }
        return nn::add(nn::matmul(hidden, clf_w_), clf_b_);
    }

    EncodedExample encode(const std::string& text,
                          SentimentClass label) const override {
        EncodedExample ex;
        ex.label = label;
        const auto max_len = static_cast<std::size_t>(config_.max_len);
        ex.token_ids.assign(max_len, pad_index_);
        ex.attention_mask.assign(max_len, 0);
        std::size_t pos = 0;
        for (const std::string& token : static_tokenize(text)) {
            if (pos >= max_len) break;
            auto it = vocabulary_.find(token);
            ex.token_ids[pos] = it == vocabulary_.end() ? unk_index_
                                                        : it->second;
            ex.attention_mask[pos] = 1;
            ++pos;
        }
        return ex;
    }

    void save_assets(const std::filesystem::path& dir) const override {
        std::string vocab_txt;
        for (const auto& t : tokens_) {
            vocab_txt += t;
            vocab_txt += '\n';
        }
        write_file(dir / "vocab.txt", vocab_txt);
    }

  private:
    struct ConvBlock {
        std::size_t width = 0;
        Var weight, bias;
    };

    std::vector<std::string> tokens_; // embedding rows, minus pad/unk
    std::unordered_map<std::string, int> vocabulary_;
    int pad_index_ = -1, unk_index_ = -1;
    Var embedding_;
    std::vector<ConvBlock> convs_;
    Var dense_w_, dense_b_, clf_w_, clf_b_;
};

// ---------------------------------------------------------------------------
// Encoder + classification head
// ---------------------------------------------------------------------------

class EncoderHeadModel final : public Model {
  public:
    EncoderHeadModel(ModelConfig config, BertEncoder encoder,
                     WordPieceTokenizer tokenizer)
        : Model(std::move(config)), encoder_(std::move(encoder)),
          tokenizer_(std::move(tokenizer)) {
        encoder_.set_trainable_top_layers(
            static_cast<std::size_t>(config_.trainable_encoder_layers));
        if (static_cast<std::size_t>(config_.max_len) >
            encoder_.dims().max_position) {
            throw TrainError("max_len exceeds encoder position table");
        }
        std::mt19937_64 rng(config_.seed);
        const std::size_t H = encoder_.dims().hidden_size;
        const std::size_t hidden =
            static_cast<std::size_t>(config_.hidden_size);
        dense_w_ = Var(glorot_uniform({H, hidden}, rng), true);
        dense_b_ = Var(Tensor({hidden}), true);
        clf_w_ = Var(glorot_uniform({hidden, 3}, rng), true);
        clf_b_ = Var(Tensor({3}), true);
        for (const Parameter& p : encoder_.params()) {
            params_.push_back({"encoder." + p.name, p.var});
        }
        params_.push_back({"head.dense.weight", dense_w_});
        params_.push_back({"head.dense.bias", dense_b_});
        params_.push_back({"head.classifier.weight", clf_w_});
        params_.push_back({"head.classifier.bias", clf_b_});
    }

    Var logits(const EncodedBatch& batch, bool training,
               std::mt19937_64* rng) override {
        Var hidden = encoder_.forward(batch.ids, batch.mask, batch.batch,
                                      batch.seq_len);
        // dense applied per token position, then masked max over positions
        Var projected =
            nn::relu(nn::add(nn::matmul(hidden, dense_w_), dense_b_));
        Var pooled = nn::max_over_time(projected, &batch.mask);
        if (training && config_.dropout > 0.0 && rng) {
            pooled = nn::dropout(pooled, config_.dropout, *rng);
        }
        return nn::add(nn::matmul(pooled, clf_w_), clf_b_);
    }

    EncodedExample encode(const std::string& text,
                          SentimentClass label) const override {
        return encode_subword(text, tokenizer_, label,
                              static_cast<std::size_t>(config_.max_len));
    }

    void save_assets(const std::filesystem::path& dir) const override {
        encoder_.save_config_assets(dir, tokenizer_.vocab(),
                                    tokenizer_.lower_case());
    }

    const BertEncoder& encoder() const { return encoder_; }

  private:
    BertEncoder encoder_;
    WordPieceTokenizer tokenizer_;
    Var dense_w_, dense_b_, clf_w_, clf_b_;
};

} // namespace

std::filesystem::path resolve_checkpoint_dir(
    const std::string& checkpoint_id) {
    if (checkpoint_id.empty()) {
        throw UsageError("encoder model needs a checkpoint_id");
    }
    std::filesystem::path direct(checkpoint_id);
    if (std::filesystem::exists(direct)) return direct;
    if (const char* root = std::getenv("DRUGSENT_CHECKPOINTS")) {
        std::filesystem::path under(std::filesystem::path(root) /
                                    checkpoint_id);
        if (std::filesystem::exists(under)) return under;
    }
    throw DataError("checkpoint unavailable: \"" + checkpoint_id +
                    "\" is not a path and was not found under "
                    "$DRUGSENT_CHECKPOINTS");
}

std::unique_ptr<Model> build_cnn(const ModelConfig& config,
                                 const StaticEmbeddingTable& table) {
    if (config.kind != ModelKind::CnnStatic) {
        throw UsageError("build_cnn requires kind == cnn_static");
    }
    config.validate();
    if (config.embedding_dim > 0 &&
        static_cast<std::size_t>(config.embedding_dim) != table.dimension) {
        throw UsageError("embedding table dimension " +
                         std::to_string(table.dimension) +
                         " does not match configured embedding_dim " +
                         std::to_string(config.embedding_dim));
    }
    return std::make_unique<CnnStaticModel>(config, table.tokens,
                                            table.vectors);
}

namespace {

std::unique_ptr<Model> build_encoder_model(const ModelConfig& config) {
    config.validate();
    const auto dir = resolve_checkpoint_dir(config.checkpoint_id);
    BertEncoder encoder = BertEncoder::load_pretrained(dir);
    WordPieceTokenizer tokenizer = WordPieceTokenizer::load(
        dir / "vocab.txt", read_lower_case_flag(dir));
    if (tokenizer.vocab_size() != encoder.dims().vocab_size) {
        throw DataError(dir.string() +
                        ": vocab.txt size does not match config vocab_size");
    }
    return std::make_unique<EncoderHeadModel>(config, std::move(encoder),
                                              std::move(tokenizer));
}

} // namespace

std::unique_ptr<Model> build_frozen_encoder_head(const ModelConfig& config) {
    if (config.kind != ModelKind::FrozenEncoderHead) {
        throw UsageError(
            "build_frozen_encoder_head requires kind == frozen_encoder_head");
    }
    return build_encoder_model(config);
}

std::unique_ptr<Model> build_finetuned_encoder(const ModelConfig& config) {
    if (config.kind != ModelKind::FinetuneGeneral &&
        config.kind != ModelKind::FinetuneClinical) {
        throw UsageError("build_finetuned_encoder requires a finetune kind");
    }
    return build_encoder_model(config);
}

std::unique_ptr<Model> build_model(
    const ModelConfig& config,
    const std::optional<StaticEmbeddingTable>& table) {
    switch (config.kind) {
    case ModelKind::CnnStatic:
        if (!table) {
            throw UsageError("cnn_static needs a static embedding table");
        }
        return build_cnn(config, *table);
    case ModelKind::FrozenEncoderHead:
        return build_frozen_encoder_head(config);
    case ModelKind::FinetuneGeneral:
    case ModelKind::FinetuneClinical:
        return build_finetuned_encoder(config);
    }
    throw UsageError("unknown model kind");
}

std::unique_ptr<Model> rebuild_cnn_skeleton(const ModelConfig& config,
                                            std::vector<std::string> tokens,
                                            std::size_t embedding_dim) {
    config.validate();
    Tensor embedding({tokens.size() + 2, embedding_dim});
    return std::make_unique<CnnStaticModel>(config, std::move(tokens),
                                            std::move(embedding));
}

std::unique_ptr<Model> rebuild_encoder_skeleton(
    const ModelConfig& config, const std::filesystem::path& asset_dir) {
    config.validate();
    BertEncoder encoder(read_bert_config(asset_dir), 0);
    WordPieceTokenizer tokenizer = WordPieceTokenizer::load(
        asset_dir / "vocab.txt", read_lower_case_flag(asset_dir));
    return std::make_unique<EncoderHeadModel>(config, std::move(encoder),
                                              std::move(tokenizer));
}

std::vector<ClassDistribution> predict_proba(
    Model& model, const std::vector<EncodedExample>& examples,
    std::size_t batch_size) {
    nn::NoGradGuard no_grad;
    std::vector<ClassDistribution> out;
    out.reserve(examples.size());
    for (std::size_t begin = 0; begin < examples.size();
         begin += batch_size) {
        const std::size_t end =
            std::min(examples.size(), begin + batch_size);
        EncodedBatch batch = make_batch(examples, begin, end);
        Var logits = model.logits(batch, /*training=*/false, nullptr);
        const Tensor& t = logits.value();
        if (t.rank() != 2 || t.dim(1) != 3 || t.dim(0) != batch.batch) {
            throw TrainError("logits shape mismatch");
        }
        for (std::size_t b = 0; b < batch.batch; ++b) {
            const double* row = t.data() + b * 3;
            double mx = std::max(row[0], std::max(row[1], row[2]));
            ClassDistribution dist;
            double sum = 0.0;
            for (int c = 0; c < 3; ++c) {
                dist.probabilities[c] = std::exp(row[c] - mx);
                sum += dist.probabilities[c];
            }
            for (int c = 0; c < 3; ++c) dist.probabilities[c] /= sum;
            out.push_back(dist);
        }
    }
    return out;
}

std::vector<int> predict_classes(Model& model,
                                 const std::vector<EncodedExample>& examples,
                                 std::size_t batch_size) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const ClassDistribution& d :
         predict_proba(model, examples, batch_size)) {
        out.push_back(d.argmax());
    }
    return out;
}

} // namespace drugsent
