#include "drugsent/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

const char* to_string(SentimentClass c) {
    switch (c) {
    case SentimentClass::Negative: return "negative";
    case SentimentClass::Neutral: return "neutral";
    case SentimentClass::Positive: return "positive";
    }
    return "?";
}

SentimentClass sentiment_from_int(int code) {
    if (code < 0 || code > 2) {
        throw std::invalid_argument("sentiment class code out of range: " +
                                    std::to_string(code));
    }
    return static_cast<SentimentClass>(code);
}

std::size_t ClassCounts::operator[](int cls) const {
    switch (cls) {
    case 0: return negative;
    case 1: return neutral;
    case 2: return positive;
    }
    throw std::invalid_argument("class index out of range");
}

// ---------------------------------------------------------------------------
// Text cleaning
// ---------------------------------------------------------------------------

namespace {

const std::unordered_map<std::string_view, std::string_view>& entity_table() {
    // Named entities seen in web-scraped review text. &nbsp; maps to a plain
    // space so the later whitespace collapse applies uniformly.
    static const std::unordered_map<std::string_view, std::string_view> table{
        {"amp", "&"},       {"lt", "<"},        {"gt", ">"},
        {"quot", "\""},     {"apos", "'"},      {"nbsp", " "},
        {"rsquo", "’"}, {"lsquo", "‘"}, {"rdquo", "”"},
        {"ldquo", "“"}, {"ndash", "–"}, {"mdash", "—"},
        {"hellip", "…"}, {"middot", "·"}, {"bull", "•"},
        {"deg", "°"},  {"plusmn", "±"}, {"times", "×"},
        {"divide", "÷"}, {"frac12", "½"}, {"frac14", "¼"},
        {"frac34", "¾"}, {"trade", "™"}, {"copy", "©"},
        {"reg", "®"},  {"pound", "£"}, {"euro", "€"},
        {"cent", "¢"}, {"yen", "¥"},  {"sect", "§"},
        {"para", "¶"}, {"laquo", "«"}, {"raquo", "»"},
        {"agrave", "à"}, {"aacute", "á"}, {"acirc", "â"},
        {"auml", "ä"}, {"aring", "å"}, {"aelig", "æ"},
        {"ccedil", "ç"}, {"egrave", "è"}, {"eacute", "é"},
        {"ecirc", "ê"}, {"euml", "ë"}, {"igrave", "ì"},
        {"iacute", "í"}, {"icirc", "î"}, {"iuml", "ï"},
        {"ntilde", "ñ"}, {"ograve", "ò"}, {"oacute", "ó"},
        {"ocirc", "ô"}, {"ouml", "ö"}, {"oslash", "ø"},
        {"ugrave", "ù"}, {"uacute", "ú"}, {"ucirc", "û"},
        {"uuml", "ü"}, {"szlig", "ß"}, {"micro", "µ"},
    };
    return table;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp <= 0x7f) {
        out += static_cast<char>(cp);
    } else if (cp <= 0x7ff) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp <= 0xffff) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

// One decoding pass. Entities require the terminating ';'. Unknown names
// and malformed numeric references pass through unchanged.
bool decode_entities_once(const std::string& in, std::string& out) {
    bool changed = false;
    out.clear();
    out.reserve(in.size());
    size_t i = 0;
    while (i < in.size()) {
        if (in[i] != '&') {
            out += in[i++];
            continue;
        }
        size_t semi = in.find(';', i + 1);
        if (semi == std::string::npos || semi == i + 1 || semi - i > 12) {
            out += in[i++];
            continue;
        }
        std::string_view body(in.data() + i + 1, semi - i - 1);
        if (body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = body.size() > 1;
            size_t j = 1;
            if (ok && (body[1] == 'x' || body[1] == 'X')) {
                j = 2;
                ok = body.size() > 2;
                for (; ok && j < body.size(); ++j) {
                    char c = body[j];
                    int d;
                    if (c >= '0' && c <= '9') d = c - '0';
                    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
                    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
                    else { ok = false; break; }
                    cp = cp * 16 + static_cast<std::uint32_t>(d);
                    if (cp > 0x10ffff) { ok = false; break; }
                }
            } else {
                for (; ok && j < body.size(); ++j) {
                    char c = body[j];
                    if (c < '0' || c > '9') { ok = false; break; }
                    cp = cp * 10 + static_cast<std::uint32_t>(c - '0');
                    if (cp > 0x10ffff) { ok = false; break; }
                }
            }
            if (ok && (cp >= 0xd800 && cp <= 0xdfff)) ok = false; // surrogates
            if (ok) {
                append_utf8(out, cp);
                changed = true;
                i = semi + 1;
                continue;
            }
        } else {
            auto it = entity_table().find(body);
            if (it != entity_table().end()) {
                out += it->second;
                changed = true;
                i = semi + 1;
                continue;
            }
        }
        out += in[i++];
    }
    return changed;
}

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
           c == '\f';
}

} // namespace

std::string clean_text(const std::string& raw) {
    // Decode entities and strip control characters to a joint fixpoint.
    // Each decode pass strictly shrinks the text, so this terminates, and
    // double-encoded residue ("&amp;#039;") resolves fully. Stripping can
    // splice a new entity together, hence the outer loop; the fixpoint also
    // makes the whole function idempotent.
    std::string cur = raw;
    std::string next;
    for (;;) {
        while (decode_entities_once(cur, next)) {
            cur.swap(next);
        }
        std::string stripped;
        stripped.reserve(cur.size());
        for (char c : cur) {
            unsigned char u = static_cast<unsigned char>(c);
            if ((u < 0x20 && !is_ascii_space(c)) || u == 0x7f) continue;
            stripped += c;
        }
        if (stripped.size() == cur.size()) break;
        cur.swap(stripped);
    }

    std::string out;
    out.reserve(cur.size());
    bool pending_space = false;
    for (char c : cur) {
        if (is_ascii_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Raw file ingestion
// ---------------------------------------------------------------------------

namespace {

// Record reader for tab-separated files whose fields may be quoted and span
// embedded tabs or newlines ("" escapes a quote inside a quoted field).
class TsvReader {
  public:
    explicit TsvReader(std::string content) : text_(std::move(content)) {}

    bool next(std::vector<std::string>& fields) {
        fields.clear();
        if (pos_ >= text_.size()) return false;
        std::string field;
        bool in_quotes = false;
        bool field_started = false;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (in_quotes) {
                if (c == '"') {
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
                        field += '"';
                        pos_ += 2;
                    } else {
                        in_quotes = false;
                        ++pos_;
                    }
                } else {
                    field += c;
                    ++pos_;
                }
                continue;
            }
            if (c == '"' && !field_started) {
                in_quotes = true;
                field_started = true;
                ++pos_;
                continue;
            }
            if (c == '\t') {
                fields.push_back(std::move(field));
                field.clear();
                field_started = false;
                ++pos_;
                continue;
            }
            if (c == '\n' || c == '\r') {
                if (c == '\r' && pos_ + 1 < text_.size() &&
                    text_[pos_ + 1] == '\n') {
                    ++pos_;
                }
                ++pos_;
                fields.push_back(std::move(field));
                return true;
            }
            field += c;
            field_started = true;
            ++pos_;
        }
        fields.push_back(std::move(field));
        return true;
    }

  private:
    std::string text_;
    size_t pos_ = 0;
};

const std::vector<std::string> kRawColumns = {
    "uniqueID", "drugName", "condition", "review",
    "rating",   "date",     "usefulCount"};

void check_header(const std::vector<std::string>& header,
                  const std::filesystem::path& path) {
    if (header.size() != kRawColumns.size()) {
        throw DataError(path.string() + ": expected " +
                        std::to_string(kRawColumns.size()) +
                        " header columns, found " +
                        std::to_string(header.size()));
    }
    for (size_t i = 0; i < header.size(); ++i) {
        std::string got = to_lower(trim(header[i]));
        // The UCI distribution leaves the first header cell (row id) empty.
        if (i == 0 && got.empty()) continue;
        if (got != to_lower(kRawColumns[i])) {
            throw DataError(path.string() + ": unexpected header column " +
                            std::to_string(i + 1) + ": \"" + header[i] +
                            "\" (expected \"" + kRawColumns[i] + "\")");
        }
    }
}

} // namespace

std::vector<RawReview> load_raw(const std::filesystem::path& path,
                                BadRowPolicy policy) {
    TsvReader reader(read_file(path));
    std::vector<std::string> fields;
    if (!reader.next(fields)) {
        throw DataError(path.string() + ": empty file, header row expected");
    }
    check_header(fields, path);

    std::vector<RawReview> out;
    size_t row = 0;
    auto bad_row = [&](const std::string& why) {
        std::string msg =
            path.string() + ": row " + std::to_string(row) + ": " + why;
        if (policy == BadRowPolicy::Abort) throw DataError(msg);
        std::cerr << "warning: skipping " << msg << "\n";
    };

    while (reader.next(fields)) {
        ++row;
        if (fields.size() == 1 && trim(fields[0]).empty()) {
            continue; // trailing blank line
        }
        if (fields.size() != kRawColumns.size()) {
            bad_row("expected " + std::to_string(kRawColumns.size()) +
                    " columns, found " + std::to_string(fields.size()));
            continue;
        }
        auto rating = parse_integer_like(fields[4]);
        if (!rating) {
            bad_row("non-numeric rating: \"" + fields[4] + "\"");
            continue;
        }
        if (*rating < 1 || *rating > 10) {
            bad_row("rating out of range [1,10]: " + std::to_string(*rating));
            continue;
        }
        if (trim(fields[3]).empty()) {
            bad_row("empty review text");
            continue;
        }
        auto useful = parse_integer_like(fields[6]);
        if (!useful || *useful < 0) {
            bad_row("bad usefulCount: \"" + fields[6] + "\"");
            continue;
        }
        RawReview r;
        r.unique_id = trim(fields[0]);
        r.drug_name = fields[1];
        r.condition = fields[2];
        r.review_text = fields[3];
        r.rating = *rating;
        r.date = fields[5];
        r.useful_count = *useful;
        out.push_back(std::move(r));
    }
    return out;
}

SentimentClass bin_rating(int rating) {
    if (rating < 1 || rating > 10) {
        throw std::invalid_argument("rating out of range [1,10]: " +
                                    std::to_string(rating));
    }
    if (rating <= 4) return SentimentClass::Negative;
    if (rating <= 8) return SentimentClass::Neutral;
    return SentimentClass::Positive;
}

LabeledExample to_labeled(const RawReview& raw) {
    LabeledExample ex;
    ex.unique_id = raw.unique_id;
    ex.text = clean_text(raw.review_text);
    ex.label = bin_rating(raw.rating);
    ex.original_rating = raw.rating;
    return ex;
}

ClassCounts class_counts(const std::vector<LabeledExample>& examples) {
    ClassCounts counts;
    for (const auto& ex : examples) {
        switch (ex.label) {
        case SentimentClass::Negative: ++counts.negative; break;
        case SentimentClass::Neutral: ++counts.neutral; break;
        case SentimentClass::Positive: ++counts.positive; break;
        }
    }
    return counts;
}

std::vector<std::size_t> stratified_sample_indices(
    const std::vector<int>& labels, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::invalid_argument("fraction must be in (0,1]");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[labels[i]].push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    for (auto& [cls, indices] : by_class) {
        auto k = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(indices.size())));
        std::shuffle(indices.begin(), indices.end(), rng);
        chosen.insert(chosen.end(), indices.begin(), indices.begin() + k);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<LabeledExample> stratified_subsample(
    const std::vector<LabeledExample>& examples, double fraction,
    std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::invalid_argument("fraction must be in (0,1]");
    }
    if (fraction == 1.0) return examples;
    std::vector<int> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) {
        labels.push_back(static_cast<int>(ex.label));
    }
    std::vector<LabeledExample> out;
    for (std::size_t i : stratified_sample_indices(labels, fraction, seed)) {
        out.push_back(examples[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prepared-file round trip
// ---------------------------------------------------------------------------

void write_prepared(const std::vector<LabeledExample>& examples,
                    const std::filesystem::path& path) {
    std::ostringstream out;
    out << "unique_id\ttext\tlabel\toriginal_rating\n";
    for (const auto& ex : examples) {
        if (ex.text.find('\t') != std::string::npos ||
            ex.text.find('\n') != std::string::npos) {
            throw DataError("prepared text contains tab/newline; clean it "
                            "first (id " + ex.unique_id + ")");
        }
        out << ex.unique_id << '\t' << ex.text << '\t'
            << static_cast<int>(ex.label) << '\t' << ex.original_rating
            << '\n';
    }
    write_file(path, out.str());
}

std::vector<LabeledExample> load_prepared(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::vector<LabeledExample> out;
    size_t line_no = 0;
    size_t begin = 0;
    while (begin < content.size()) {
        size_t end = content.find('\n', begin);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        begin = end + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != "unique_id\ttext\tlabel\toriginal_rating") {
                throw DataError(path.string() + ": bad prepared-file header");
            }
            continue;
        }
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 4) {
            throw DataError(path.string() + ": line " +
                            std::to_string(line_no) + ": expected 4 columns");
        }
        LabeledExample ex;
        ex.unique_id = fields[0];
        ex.text = fields[1];
        auto label = parse_integer_like(fields[2]);
        auto rating = parse_integer_like(fields[3]);
        if (!label || *label < 0 || *label > 2) {
            throw DataError(path.string() + ": line " +
                            std::to_string(line_no) + ": bad label");
        }
        if (!rating || *rating < 1 || *rating > 10) {
            throw DataError(path.string() + ": line " +
                            std::to_string(line_no) + ": bad rating");
        }
        ex.label = sentiment_from_int(*label);
        ex.original_rating = *rating;
        out.push_back(std::move(ex));
    }
    return out;
}

} // namespace drugsent
