#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "drugsent/corpus.hpp"
#include "drugsent/tensor.hpp"

namespace drugsent {

constexpr std::size_t kDefaultMaxLen = 128;

// Fixed-length model input. The mask is a prefix of 1s followed by 0s.
struct EncodedExample {
    std::vector<int> token_ids;           // length == max_len
    std::vector<std::uint8_t> attention_mask; // length == max_len
    SentimentClass label = SentimentClass::Neutral;

    std::size_t max_len() const { return token_ids.size(); }
    std::size_t mask_sum() const;
};

// Pretrained context-independent word vectors plus appended pad (zeros)
// and unk (seeded uniform in [-0.05, 0.05]) rows.
struct StaticEmbeddingTable {
    std::size_t dimension = 0;
    std::vector<std::string> tokens; // row order, excludes pad/unk
    std::unordered_map<std::string, int> vocabulary;
    nn::Tensor vectors; // (|tokens|+2) x dimension
    int pad_index = -1;
    int unk_index = -1;

    std::size_t rows() const { return vectors.dim(0); }
    int lookup(const std::string& token) const;
};

// Reads word2vec text format ("|V| dim" header, one token + dim reals per
// line) or the equivalent binary format (same header line, float32 vectors).
// `keep`, when given, restricts loading to that token set.
StaticEmbeddingTable load_static_embeddings(
    const std::filesystem::path& path, std::uint64_t seed,
    const std::optional<std::unordered_set<std::string>>& keep = std::nullopt);

// Builds a table directly (tests, synthetic fixtures).
StaticEmbeddingTable make_static_table(std::vector<std::string> tokens,
                                       nn::Tensor word_vectors,
                                       std::uint64_t seed);

// Lowercased word tokens split at whitespace and punctuation (punctuation
// characters are separators, not tokens).
std::vector<std::string> static_tokenize(const std::string& text);

EncodedExample encode_static(const std::string& text,
                             const StaticEmbeddingTable& table,
                             SentimentClass label,
                             std::size_t max_len = kDefaultMaxLen);

// WordPiece vocabulary + rules, loaded from a checkpoint asset directory
// holding vocab.txt (one token per line, line number = id).
class WordPieceTokenizer {
  public:
    WordPieceTokenizer() = default;
    WordPieceTokenizer(std::vector<std::string> vocab, bool lower_case);

    static WordPieceTokenizer load(const std::filesystem::path& vocab_file,
                                   bool lower_case);

    const std::vector<std::string>& vocab() const { return vocab_; }
    bool lower_case() const { return lower_case_; }
    std::size_t vocab_size() const { return vocab_.size(); }

    int cls_id() const { return cls_id_; }
    int sep_id() const { return sep_id_; }
    int pad_id() const { return pad_id_; }
    int unk_id() const { return unk_id_; }

    // Basic-tokenize (punctuation split, optional lowercasing) then greedy
    // longest-match-first subword segmentation.
    std::vector<int> tokenize(const std::string& text) const;

  private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
    bool lower_case_ = false;
    int cls_id_ = -1, sep_id_ = -1, pad_id_ = -1, unk_id_ = -1;
};

// [CLS] pieces... [SEP] with truncation to max_len (the separator survives
// truncation as the last position) and right padding.
EncodedExample encode_subword(const std::string& text,
                              const WordPieceTokenizer& tokenizer,
                              SentimentClass label,
                              std::size_t max_len = kDefaultMaxLen);

} // namespace drugsent
