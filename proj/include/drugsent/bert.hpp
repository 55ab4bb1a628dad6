#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drugsent/autograd.hpp"
#include "drugsent/weights.hpp"

namespace drugsent {

struct BertDims {
    std::size_t vocab_size = 0;
    std::size_t hidden_size = 0;
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::size_t intermediate_size = 0;
    std::size_t max_position = 512;
    std::size_t type_vocab_size = 2;
    double layer_norm_eps = 1e-12;

    void validate() const;
};

// Transformer encoder (BERT layout): token/position/type embeddings with
// layer norm, then post-norm blocks of multi-head self-attention and a
// GELU feed-forward. Supports freezing everything except the top k blocks;
// frozen depth also stops gradient flow below the first trainable block.
class BertEncoder {
  public:
    BertEncoder() = default;
    BertEncoder(BertDims dims, std::uint64_t seed); // random initialization

    // Checkpoint asset directory: config.json, tokenizer_config.json,
    // vocab.txt, weights.bin.
    static BertEncoder load_pretrained(const std::filesystem::path& dir);
    void save_pretrained(const std::filesystem::path& dir,
                         const std::vector<std::string>& vocab,
                         bool lower_case) const;
    // Same minus the weights file (trained checkpoints store the full
    // model's weights under the same name).
    void save_config_assets(const std::filesystem::path& dir,
                            const std::vector<std::string>& vocab,
                            bool lower_case) const;

    const BertDims& dims() const { return dims_; }

    // 0 = fully frozen; k>0 unfreezes the top k blocks. Embeddings and
    // lower blocks stay frozen either way.
    void set_trainable_top_layers(std::size_t k);
    std::size_t trainable_top_layers() const { return trainable_top_; }

    // ids/mask are B*T row-major; returns final hidden states (B,T,H).
    nn::Var forward(const std::vector<int>& ids,
                    const std::vector<std::uint8_t>& mask, std::size_t batch,
                    std::size_t seq_len) const;

    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }

  private:
    struct Layer {
        nn::Var q_w, q_b, k_w, k_b, v_w, v_b;
        nn::Var attn_out_w, attn_out_b, attn_ln_g, attn_ln_b;
        nn::Var ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b, ffn_ln_g, ffn_ln_b;
    };

    nn::Var layer_forward(const Layer& layer, nn::Var hidden,
                          const nn::Var& mask_bias, std::size_t batch,
                          std::size_t seq_len) const;
    void build_params();

    BertDims dims_;
    nn::Var word_emb_, pos_emb_, type_emb_, emb_ln_g_, emb_ln_b_;
    std::vector<Layer> layers_;
    std::vector<Parameter> params_;
    std::size_t trainable_top_ = 0;
};

// Reads config.json + tokenizer_config.json from an asset directory.
BertDims read_bert_config(const std::filesystem::path& dir);
bool read_lower_case_flag(const std::filesystem::path& dir);

} // namespace drugsent
