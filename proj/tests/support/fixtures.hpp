#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drugsent/bert.hpp"
#include "drugsent/corpus.hpp"
#include "drugsent/encoders.hpp"

namespace drugsent::testing {

// Fresh empty directory under the system temp root; wiped if it exists.
std::filesystem::path fresh_dir(const std::string& name);

// Sentiment-bearing vocabulary used by the synthetic corpus.
const std::vector<std::string>& synth_vocabulary();

// Deterministic corpus whose texts carry class-correlated words, so small
// models can actually learn it. Ratings are drawn inside the class's bin.
std::vector<LabeledExample> make_synth_corpus(std::size_t per_class,
                                              std::uint64_t seed);

// Raw seven-column review file (with some HTML-entity residue) for the
// ingestion path.
void write_synth_raw_file(const std::filesystem::path& path,
                          const std::vector<LabeledExample>& examples);

// word2vec text (or binary) file over the synthetic vocabulary.
void write_synth_w2v(const std::filesystem::path& path, std::size_t dim,
                     std::uint64_t seed, bool binary = false);

// WordPiece vocabulary covering the synthetic corpus plus suffix pieces.
std::vector<std::string> synth_wordpiece_vocab();

// Randomly initialized mini encoder checkpoint in the asset-directory
// layout (config.json, tokenizer_config.json, vocab.txt, weights.bin).
void write_mini_encoder_checkpoint(const std::filesystem::path& dir,
                                   std::uint64_t seed,
                                   std::size_t hidden = 32,
                                   std::size_t layers = 4,
                                   std::size_t heads = 2,
                                   bool lower_case = false);

} // namespace drugsent::testing
