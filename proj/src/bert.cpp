#include "drugsent/bert.hpp"

#include <cmath>
#include <optional>
#include <random>

#include <json.hpp>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

using nn::Shape;
using nn::Tensor;
using nn::Var;

void BertDims::validate() const {
    if (vocab_size == 0 || hidden_size == 0 || num_layers == 0 ||
        num_heads == 0 || intermediate_size == 0 || max_position == 0 ||
        type_vocab_size == 0) {
        throw TrainError("encoder dimensions must all be positive");
    }
    if (hidden_size % num_heads != 0) {
        throw TrainError("hidden size " + std::to_string(hidden_size) +
                         " not divisible by head count " +
                         std::to_string(num_heads));
    }
}

BertEncoder::BertEncoder(BertDims dims, std::uint64_t seed) : dims_(dims) {
    dims_.validate();
    std::mt19937_64 rng(seed);
    const double std = 0.02;
    auto param = [&](Shape shape) {
        return Var(nn::normal_init(shape, std, rng), false);
    };
    auto ones = [&](std::size_t n) { return Var(Tensor({n}, 1.0), false); };
    auto zeros = [&](std::size_t n) { return Var(Tensor({n}, 0.0), false); };

    const std::size_t H = dims_.hidden_size;
    word_emb_ = param({dims_.vocab_size, H});
    pos_emb_ = param({dims_.max_position, H});
    type_emb_ = param({dims_.type_vocab_size, H});
    emb_ln_g_ = ones(H);
    emb_ln_b_ = zeros(H);
    layers_.resize(dims_.num_layers);
    for (Layer& l : layers_) {
        l.q_w = param({H, H});
        l.q_b = zeros(H);
        l.k_w = param({H, H});
        l.k_b = zeros(H);
        l.v_w = param({H, H});
        l.v_b = zeros(H);
        l.attn_out_w = param({H, H});
        l.attn_out_b = zeros(H);
        l.attn_ln_g = ones(H);
        l.attn_ln_b = zeros(H);
        l.ffn_in_w = param({H, dims_.intermediate_size});
        l.ffn_in_b = zeros(dims_.intermediate_size);
        l.ffn_out_w = param({dims_.intermediate_size, H});
        l.ffn_out_b = zeros(H);
        l.ffn_ln_g = ones(H);
        l.ffn_ln_b = zeros(H);
    }
    build_params();
}

void BertEncoder::build_params() {
    params_.clear();
    auto push = [&](const std::string& name, const Var& v) {
        params_.push_back({name, v});
    };
    push("embeddings.word_embeddings", word_emb_);
    push("embeddings.position_embeddings", pos_emb_);
    push("embeddings.token_type_embeddings", type_emb_);
    push("embeddings.layer_norm.gamma", emb_ln_g_);
    push("embeddings.layer_norm.beta", emb_ln_b_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string p = "layer." + std::to_string(i) + ".";
        Layer& l = layers_[i];
        push(p + "attention.query.weight", l.q_w);
        push(p + "attention.query.bias", l.q_b);
        push(p + "attention.key.weight", l.k_w);
        push(p + "attention.key.bias", l.k_b);
        push(p + "attention.value.weight", l.v_w);
        push(p + "attention.value.bias", l.v_b);
        push(p + "attention.output.weight", l.attn_out_w);
        push(p + "attention.output.bias", l.attn_out_b);
        push(p + "attention.layer_norm.gamma", l.attn_ln_g);
        push(p + "attention.layer_norm.beta", l.attn_ln_b);
        push(p + "ffn.intermediate.weight", l.ffn_in_w);
        push(p + "ffn.intermediate.bias", l.ffn_in_b);
        push(p + "ffn.output.weight", l.ffn_out_w);
        push(p + "ffn.output.bias", l.ffn_out_b);
        push(p + "ffn.layer_norm.gamma", l.ffn_ln_g);
        push(p + "ffn.layer_norm.beta", l.ffn_ln_b);
    }
}

void BertEncoder::set_trainable_top_layers(std::size_t k) {
    if (k > dims_.num_layers) {
        throw TrainError("cannot unfreeze " + std::to_string(k) +
                         " blocks of a " + std::to_string(dims_.num_layers) +
                         "-block encoder");
    }
    trainable_top_ = k;
    const std::size_t split = dims_.num_layers - k;
    word_emb_.set_requires_grad(false);
    pos_emb_.set_requires_grad(false);
    type_emb_.set_requires_grad(false);
    emb_ln_g_.set_requires_grad(false);
    emb_ln_b_.set_requires_grad(false);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const bool t = i >= split;
        Layer& l = layers_[i];
        for (Var* v : {&l.q_w, &l.q_b, &l.k_w, &l.k_b, &l.v_w, &l.v_b,
                       &l.attn_out_w, &l.attn_out_b, &l.attn_ln_g,
                       &l.attn_ln_b, &l.ffn_in_w, &l.ffn_in_b, &l.ffn_out_w,
                       &l.ffn_out_b, &l.ffn_ln_g, &l.ffn_ln_b}) {
            v->set_requires_grad(t);
        }
    }
}

Var BertEncoder::layer_forward(const Layer& layer, Var hidden,
                               const Var& mask_bias, std::size_t batch,
                               std::size_t seq_len) const {
    const std::size_t H = dims_.hidden_size;
    const std::size_t heads = dims_.num_heads;
    const std::size_t dh = H / heads;

    auto split_heads = [&](const Var& x) {
        // (B,T,H) -> (B,heads,T,dh)
        return nn::permute(nn::reshape(x, {batch, seq_len, heads, dh}),
                           {0, 2, 1, 3});
    };
    Var q = split_heads(nn::add(nn::matmul(hidden, layer.q_w), layer.q_b));
    Var k = split_heads(nn::add(nn::matmul(hidden, layer.k_w), layer.k_b));
    Var v = split_heads(nn::add(nn::matmul(hidden, layer.v_w), layer.v_b));

    Var scores = nn::matmul(q, nn::permute(k, {0, 1, 3, 2}));
    scores = nn::scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
    scores = nn::add(scores, mask_bias); // (B,1,1,T) broadcast
    Var attn = nn::softmax_lastdim(scores);
    Var context = nn::matmul(attn, v); // (B,heads,T,dh)
    context = nn::reshape(nn::permute(context, {0, 2, 1, 3}),
                          {batch, seq_len, H});

    Var attn_out =
        nn::add(nn::matmul(context, layer.attn_out_w), layer.attn_out_b);
    hidden = nn::layer_norm(nn::add(hidden, attn_out), layer.attn_ln_g,
                            layer.attn_ln_b, dims_.layer_norm_eps);

    Var ffn = nn::gelu(
        nn::add(nn::matmul(hidden, layer.ffn_in_w), layer.ffn_in_b));
    ffn = nn::add(nn::matmul(ffn, layer.ffn_out_w), layer.ffn_out_b);
    return nn::layer_norm(nn::add(hidden, ffn), layer.ffn_ln_g,
                          layer.ffn_ln_b, dims_.layer_norm_eps);
}

Var BertEncoder::forward(const std::vector<int>& ids,
                         const std::vector<std::uint8_t>& mask,
                         std::size_t batch, std::size_t seq_len) const {
    if (ids.size() != batch * seq_len || mask.size() != ids.size()) {
        throw TrainError("encoder input size mismatch");
    }
    if (seq_len > dims_.max_position) {
        throw TrainError("sequence length " + std::to_string(seq_len) +
                         " exceeds maximum position " +
                         std::to_string(dims_.max_position));
    }

    // additive attention bias: 0 on real tokens, -1e9 on padding
    Tensor bias({batch, 1, 1, seq_len});
    for (std::size_t i = 0; i < mask.size(); ++i) {
        bias[i] = mask[i] ? 0.0 : -1e9;
    }
    Var mask_bias(std::move(bias));

    std::vector<int> positions(ids.size());
    std::vector<int> types(ids.size(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < seq_len; ++t) {
            positions[b * seq_len + t] = static_cast<int>(t);
        }
    }

    const std::size_t split = dims_.num_layers - trainable_top_;
    Var hidden;
    {
        // Everything below the first trainable block runs without a tape.
        std::optional<nn::NoGradGuard> guard;
        if (split > 0) guard.emplace();
        Var embedded = nn::add(
            nn::add(nn::embedding_rows(word_emb_, ids, {batch, seq_len}),
                    nn::embedding_rows(pos_emb_, positions, {batch, seq_len})),
            nn::embedding_rows(type_emb_, types, {batch, seq_len}));
        hidden = nn::layer_norm(embedded, emb_ln_g_, emb_ln_b_,
                                dims_.layer_norm_eps);
        for (std::size_t l = 0; l < split; ++l) {
            hidden = layer_forward(layers_[l], hidden, mask_bias, batch,
                                   seq_len);
        }
    }
    if (split > 0) hidden = hidden.detach();
    for (std::size_t l = split; l < dims_.num_layers; ++l) {
        hidden = layer_forward(layers_[l], hidden, mask_bias, batch, seq_len);
    }
    return hidden;
}

// ---------------------------------------------------------------------------
// Asset directory I/O
// ---------------------------------------------------------------------------

BertDims read_bert_config(const std::filesystem::path& dir) {
    const auto config_path = dir / "config.json";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(config_path.string() + ": " + e.what());
    }
    BertDims d;
    try {
        d.vocab_size = j.at("vocab_size").get<std::size_t>();
        d.hidden_size = j.at("hidden_size").get<std::size_t>();
        d.num_layers = j.at("num_hidden_layers").get<std::size_t>();
        d.num_heads = j.at("num_attention_heads").get<std::size_t>();
        d.intermediate_size = j.at("intermediate_size").get<std::size_t>();
        d.max_position = j.value("max_position_embeddings", std::size_t{512});
        d.type_vocab_size = j.value("type_vocab_size", std::size_t{2});
        d.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(config_path.string() + ": " + e.what());
    }
    d.validate();
    return d;
}

bool read_lower_case_flag(const std::filesystem::path& dir) {
    const auto path = dir / "tokenizer_config.json";
    if (!std::filesystem::exists(path)) return false;
    try {
        auto j = nlohmann::json::parse(read_file(path));
        return j.value("do_lower_case", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

BertEncoder BertEncoder::load_pretrained(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "config.json")) {
        throw DataError("checkpoint unavailable: " + dir.string() +
                        " has no config.json");
    }
    BertEncoder enc(read_bert_config(dir), 0);
    load_weights_into(enc.params_, read_weights(dir / "weights.bin"),
                      dir.string());
    return enc;
}

void BertEncoder::save_pretrained(const std::filesystem::path& dir,
                                  const std::vector<std::string>& vocab,
                                  bool lower_case) const {
    save_config_assets(dir, vocab, lower_case);
    write_weights(dir / "weights.bin", params_);
}

void BertEncoder::save_config_assets(const std::filesystem::path& dir,
                                     const std::vector<std::string>& vocab,
                                     bool lower_case) const {
    std::filesystem::create_directories(dir);
    nlohmann::json config{
        {"vocab_size", dims_.vocab_size},
        {"hidden_size", dims_.hidden_size},
        {"num_hidden_layers", dims_.num_layers},
        {"num_attention_heads", dims_.num_heads},
        {"intermediate_size", dims_.intermediate_size},
        {"max_position_embeddings", dims_.max_position},
        {"type_vocab_size", dims_.type_vocab_size},
        {"layer_norm_eps", dims_.layer_norm_eps},
    };
    write_file(dir / "config.json", config.dump(2) + "\n");
    nlohmann::json tok{{"do_lower_case", lower_case}};
    write_file(dir / "tokenizer_config.json", tok.dump(2) + "\n");
    std::string vocab_txt;
    for (const auto& t : vocab) {
        vocab_txt += t;
        vocab_txt += '\n';
    }
    write_file(dir / "vocab.txt", vocab_txt);
}

} // namespace drugsent
