#include "drugsent/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "drugsent/autograd.hpp"
#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

std::size_t EncodedExample::mask_sum() const {
    std::size_t n = 0;
    for (auto m : attention_mask) n += m;
    return n;
}

int StaticEmbeddingTable::lookup(const std::string& token) const {
    auto it = vocabulary.find(token);
    return it == vocabulary.end() ? unk_index : it->second;
}

// ---------------------------------------------------------------------------
// word2vec file loading
// ---------------------------------------------------------------------------

namespace {

void append_rows(StaticEmbeddingTable& table,
                 std::vector<std::vector<double>>& rows,
                 const std::string& token, std::vector<double> values) {
    if (table.vocabulary.count(token)) {
        std::cerr << "warning: duplicate embedding token \"" << token
                  << "\", keeping first\n";
        return;
    }
    table.vocabulary.emplace(token, static_cast<int>(rows.size()));
    table.tokens.push_back(token);
    rows.push_back(std::move(values));
}

StaticEmbeddingTable finish_table(
    StaticEmbeddingTable table, std::vector<std::vector<double>> rows,
    std::uint64_t seed) {
    const std::size_t dim = table.dimension;
    nn::Tensor vectors({rows.size() + 2, dim});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].begin(), rows[r].end(), vectors.data() + r * dim);
    }
    table.pad_index = static_cast<int>(rows.size());
    table.unk_index = static_cast<int>(rows.size() + 1);
    // pad row stays zero; unk row is a small seeded random vector
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.05, 0.05);
    double* unk = vectors.data() + (rows.size() + 1) * dim;
    for (std::size_t c = 0; c < dim; ++c) unk[c] = dist(rng);
    table.vectors = std::move(vectors);
    return table;
}

// Peeks past the header; float32 payloads contain bytes text never does.
bool looks_binary(std::istream& in) {
    const auto pos = in.tellg();
    char buf[4096];
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    in.clear();
    in.seekg(pos);
    for (std::streamsize i = 0; i < got; ++i) {
        unsigned char c = static_cast<unsigned char>(buf[i]);
        if (c == 0 || c < 0x09 || (c > 0x0d && c < 0x20)) return true;
    }
    return false;
}

} // namespace

StaticEmbeddingTable load_static_embeddings(
    const std::filesystem::path& path, std::uint64_t seed,
    const std::optional<std::unordered_set<std::string>>& keep) {
    // streamed: the published vector files run to gigabytes
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embeddings: " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw DataError(path.string() + ": missing embedding header line");
    }
    std::istringstream header(header_line);
    long long vocab_count = -1, dim = -1;
    header >> vocab_count >> dim;
    std::string extra;
    if (!header || (header >> extra) || vocab_count < 0 || dim <= 0) {
        throw DataError(path.string() +
                        ": embedding header must be \"|V| dim\"");
    }

    StaticEmbeddingTable table;
    table.dimension = static_cast<std::size_t>(dim);
    std::vector<std::vector<double>> rows;
    auto wanted = [&](const std::string& token) {
        return !keep || keep->count(token) > 0;
    };

    if (looks_binary(in)) {
        std::vector<char> payload(static_cast<std::size_t>(dim) * 4);
        for (long long w = 0; w < vocab_count; ++w) {
            std::string token;
            if (!std::getline(in, token, ' ') ||
                !in.read(payload.data(),
                         static_cast<std::streamsize>(payload.size()))) {
                throw DataError(path.string() + ": truncated binary entry " +
                                std::to_string(w + 1));
            }
            // the format puts a newline after each vector
            if (!token.empty() && token.front() == '\n') token.erase(0, 1);
            if (!wanted(token)) continue;
            std::vector<double> values(static_cast<std::size_t>(dim));
            for (long long c = 0; c < dim; ++c) {
                float f;
                std::memcpy(&f, payload.data() + c * 4, 4);
                values[static_cast<std::size_t>(c)] = f;
            }
            append_rows(table, rows, token, std::move(values));
        }
    } else {
        std::string line;
        long long line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            std::istringstream fields(line);
            std::string token;
            fields >> token;
            std::vector<double> values;
            values.reserve(static_cast<std::size_t>(dim));
            double v;
            while (fields >> v) values.push_back(v);
            if (values.size() != static_cast<std::size_t>(dim)) {
                throw DataError(path.string() + ": line " +
                                std::to_string(line_no) + ": expected " +
                                std::to_string(dim) + " values, found " +
                                std::to_string(values.size()));
            }
            if (wanted(token)) {
                append_rows(table, rows, token, std::move(values));
            }
        }
        if (!keep && rows.size() != static_cast<std::size_t>(vocab_count)) {
            // duplicates reduce the count; anything else is a bad header
            std::cerr << "warning: " << path.string() << ": header declares "
                      << vocab_count << " vectors, file has " << rows.size()
                      << "\n";
        }
    }
    return finish_table(std::move(table), std::move(rows), seed);
}

StaticEmbeddingTable make_static_table(std::vector<std::string> tokens,
                                       nn::Tensor word_vectors,
                                       std::uint64_t seed) {
    if (word_vectors.rank() != 2 || word_vectors.dim(0) != tokens.size()) {
        throw std::invalid_argument("make_static_table shape mismatch");
    }
    StaticEmbeddingTable table;
    table.dimension = word_vectors.dim(1);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        std::vector<double> values(
            word_vectors.data() + r * table.dimension,
            word_vectors.data() + (r + 1) * table.dimension);
        append_rows(table, rows, tokens[r], std::move(values));
    }
    return finish_table(std::move(table), std::move(rows), seed);
}

// ---------------------------------------------------------------------------
// Static-embedding tokenization
// ---------------------------------------------------------------------------

std::vector<std::string> static_tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        const bool sep = std::isspace(u) || (u < 0x80 && std::ispunct(u));
        if (sep) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += static_cast<char>(
                u < 0x80 ? std::tolower(u) : u); // bytewise; UTF-8 kept as-is
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

EncodedExample encode_static(const std::string& text,
                             const StaticEmbeddingTable& table,
                             SentimentClass label, std::size_t max_len) {
    EncodedExample ex;
    ex.label = label;
    ex.token_ids.assign(max_len, table.pad_index);
    ex.attention_mask.assign(max_len, 0);
    std::size_t pos = 0;
    for (const std::string& token : static_tokenize(text)) {
        if (pos >= max_len) break;
        ex.token_ids[pos] = table.lookup(token);
        ex.attention_mask[pos] = 1;
        ++pos;
    }
    return ex;
}

// ---------------------------------------------------------------------------
// WordPiece
// ---------------------------------------------------------------------------

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab,
                                       bool lower_case)
    : vocab_(std::move(vocab)), lower_case_(lower_case) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        index_.emplace(vocab_[i], static_cast<int>(i));
    }
    auto need = [&](const char* token) {
        auto it = index_.find(token);
        if (it == index_.end()) {
            throw DataError(std::string("tokenizer vocabulary lacks ") +
                            token);
        }
        return it->second;
    };
    pad_id_ = need("[PAD]");
    unk_id_ = need("[UNK]");
    cls_id_ = need("[CLS]");
    sep_id_ = need("[SEP]");
}

WordPieceTokenizer WordPieceTokenizer::load(
    const std::filesystem::path& vocab_file, bool lower_case) {
    std::string content = read_file(vocab_file);
    std::vector<std::string> vocab;
    std::size_t begin = 0;
    while (begin < content.size()) {
        std::size_t end = content.find('\n', begin);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        begin = end + 1;
        if (line.empty() && begin >= content.size()) break; // trailing EOL
        vocab.emplace_back(line);
    }
    if (vocab.empty()) {
        throw DataError(vocab_file.string() + ": empty vocabulary");
    }
    return WordPieceTokenizer(std::move(vocab), lower_case);
}

namespace {

bool is_bert_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c);
}

// Splits into words, detaching punctuation into single-char tokens.
std::vector<std::string> basic_tokenize(const std::string& text,
                                        bool lower_case) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            flush();
        } else if (is_bert_punct(u)) {
            flush();
            words.emplace_back(1, c);
        } else {
            cur += static_cast<char>(
                lower_case && u < 0x80 ? std::tolower(u) : u);
        }
    }
    flush();
    return words;
}

constexpr std::size_t kMaxWordChars = 200;

} // namespace

std::vector<int> WordPieceTokenizer::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& word : basic_tokenize(text, lower_case_)) {
        if (word.size() > kMaxWordChars) {
            ids.push_back(unk_id_);
            continue;
        }
        // greedy longest-match-first
        std::vector<int> pieces;
        std::size_t start = 0;
        bool ok = true;
        while (start < word.size()) {
            std::size_t end = word.size();
            int found = -1;
            while (end > start) {
                std::string piece =
                    (start > 0 ? "##" : "") + word.substr(start, end - start);
                auto it = index_.find(piece);
                if (it != index_.end()) {
                    found = it->second;
                    break;
                }
                --end;
            }
            if (found < 0) {
                ok = false;
                break;
            }
            pieces.push_back(found);
            start = end;
        }
        if (ok) {
            ids.insert(ids.end(), pieces.begin(), pieces.end());
        } else {
            ids.push_back(unk_id_);
        }
    }
    return ids;
}

EncodedExample encode_subword(const std::string& text,
                              const WordPieceTokenizer& tokenizer,
                              SentimentClass label, std::size_t max_len) {
    if (max_len < 2) {
        throw std::invalid_argument("max_len must fit [CLS] and [SEP]");
    }
    std::vector<int> pieces = tokenizer.tokenize(text);
    if (pieces.size() > max_len - 2) {
        pieces.resize(max_len - 2); // keep the head
    }
    EncodedExample ex;
    ex.label = label;
    ex.token_ids.assign(max_len, tokenizer.pad_id());
    ex.attention_mask.assign(max_len, 0);
    std::size_t pos = 0;
    ex.token_ids[pos++] = tokenizer.cls_id();
    for (int id : pieces) ex.token_ids[pos++] = id;
    ex.token_ids[pos++] = tokenizer.sep_id();
    for (std::size_t i = 0; i < pos; ++i) ex.attention_mask[i] = 1;
    return ex;
}

} // namespace drugsent
