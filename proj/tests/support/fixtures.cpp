#include "fixtures.hpp"

#include <algorithm>
#include <cstring>
#include <random>
#include <sstream>

#include "drugsent/autograd.hpp"
#include "drugsent/util.hpp"

namespace drugsent::testing {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir =
        std::filesystem::temp_directory_path() / "drugsent_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

namespace {

const std::vector<std::string> kNegativeWords = {
    "awful", "terrible", "useless", "nausea", "pain", "worse", "dreadful"};
const std::vector<std::string> kNeutralWords = {
    "okay", "moderate", "average", "mixed", "unsure", "tolerable"};
const std::vector<std::string> kPositiveWords = {
    "great", "excellent", "relief", "amazing", "wonderful", "effective"};
const std::vector<std::string> kFillerWords = {
    "the", "drug", "took", "weeks", "doctor", "dose",  "day",
    "felt", "after", "first", "month", "started", "still"};

} // namespace

const std::vector<std::string>& synth_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (const auto* list :
             {&kNegativeWords, &kNeutralWords, &kPositiveWords,
              &kFillerWords}) {
            v.insert(v.end(), list->begin(), list->end());
        }
        return v;
    }();
    return vocab;
}

std::vector<LabeledExample> make_synth_corpus(std::size_t per_class,
                                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LabeledExample> out;
    std::size_t id = 0;
    auto pick = [&](const std::vector<std::string>& words) {
        return words[rng() % words.size()];
    };
    for (int cls = 0; cls < 3; ++cls) {
        const auto& class_words = cls == 0   ? kNegativeWords
                                  : cls == 1 ? kNeutralWords
                                             : kPositiveWords;
        for (std::size_t i = 0; i < per_class; ++i) {
            std::ostringstream text;
            const std::size_t len = 6 + rng() % 8;
            for (std::size_t w = 0; w < len; ++w) {
                if (w) text << ' ';
                // class words dominate, filler mixes in
                text << (rng() % 3 == 0 ? pick(kFillerWords)
                                        : pick(class_words));
            }
            LabeledExample ex;
            ex.unique_id = std::to_string(100000 + id++);
            ex.text = text.str();
            ex.label = sentiment_from_int(cls);
            ex.original_rating = cls == 0   ? 1 + static_cast<int>(rng() % 4)
                                 : cls == 1 ? 5 + static_cast<int>(rng() % 4)
                                            : 9 + static_cast<int>(rng() % 2);
            out.push_back(std::move(ex));
        }
    }
    // interleave classes deterministically
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

void write_synth_raw_file(const std::filesystem::path& path,
                          const std::vector<LabeledExample>& examples) {
    std::ostringstream out;
    out << "\tdrugName\tcondition\treview\trating\tdate\tusefulCount\n";
    std::size_t i = 0;
    for (const LabeledExample& ex : examples) {
        // every third review carries entity residue; every fifth is quoted
        std::string review = ex.text;
        if (i % 3 == 0) review += " it&amp;#039;s fine";
        if (i % 5 == 0) review = "\"" + review + "\"";
        out << ex.unique_id << "\tDrug" << (i % 7) << "\t"
            << (i % 4 == 0 ? "" : "Condition") << "\t" << review << "\t"
            << ex.original_rating << ".0\t"
            << "May 1, 2015\t" << (i % 30) << "\n";
        ++i;
    }
    write_file(path, out.str());
}

void write_synth_w2v(const std::filesystem::path& path, std::size_t dim,
                     std::uint64_t seed, bool binary) {
    const auto& vocab = synth_vocabulary();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    if (!binary) {
        std::ostringstream out;
        out << vocab.size() << " " << dim << "\n";
        for (const std::string& token : vocab) {
            out << token;
            for (std::size_t c = 0; c < dim; ++c) out << " " << dist(rng);
            out << "\n";
        }
        write_file(path, out.str());
        return;
    }
    std::string out = std::to_string(vocab.size()) + " " +
                      std::to_string(dim) + "\n";
    for (const std::string& token : vocab) {
        out += token;
        out += ' ';
        for (std::size_t c = 0; c < dim; ++c) {
            const float f = static_cast<float>(dist(rng));
            char bytes[4];
            std::memcpy(bytes, &f, 4);
            out.append(bytes, 4);
        }
        out += '\n';
    }
    write_file(path, out);
}

std::vector<std::string> synth_wordpiece_vocab() {
    std::vector<std::string> vocab = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (const std::string& word : synth_vocabulary()) {
        vocab.push_back(word);
    }
    // single characters and continuation pieces for subword coverage
    for (char c = 'a'; c <= 'z'; ++c) {
        vocab.push_back(std::string(1, c));
        vocab.push_back("##" + std::string(1, c));
    }
    for (const char* piece : {"##ing", "##ed", "##s", "##ly"}) {
        vocab.push_back(piece);
    }
    vocab.push_back(".");
    vocab.push_back(",");
    vocab.push_back("'");
    return vocab;
}

void write_mini_encoder_checkpoint(const std::filesystem::path& dir,
                                   std::uint64_t seed, std::size_t hidden,
                                   std::size_t layers, std::size_t heads,
                                   bool lower_case) {
    const auto vocab = synth_wordpiece_vocab();
    BertDims dims;
    dims.vocab_size = vocab.size();
    dims.hidden_size = hidden;
    dims.num_layers = layers;
    dims.num_heads = heads;
    dims.intermediate_size = hidden * 2;
    dims.max_position = 128;
    dims.type_vocab_size = 2;
    BertEncoder encoder(dims, seed);
    encoder.save_pretrained(dir, vocab, lower_case);
}

} // namespace drugsent::testing
