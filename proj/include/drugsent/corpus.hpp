#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drugsent {

// Integer codes are fixed: the severe-error definition in the analysis
// module depends on Negative == 0 and Positive == 2.
enum class SentimentClass : int {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
};

constexpr int kNumClasses = 3;

const char* to_string(SentimentClass c);
SentimentClass sentiment_from_int(int code);

// One row of the raw Drugs.com review file.
struct RawReview {
    std::string unique_id;
    std::string drug_name;
    std::string condition; // may be empty
    std::string review_text;
    int rating = 0; // integer in [1,10]
    std::string date;
    long useful_count = 0;
};

struct LabeledExample {
    std::string unique_id;
    std::string text;
    SentimentClass label = SentimentClass::Neutral;
    int original_rating = 0;
};

struct ClassCounts {
    std::size_t negative = 0;
    std::size_t neutral = 0;
    std::size_t positive = 0;

    std::size_t total() const { return negative + neutral + positive; }
    std::size_t operator[](int cls) const;
    bool operator==(const ClassCounts&) const = default;
};

enum class BadRowPolicy {
    Abort, // default: fail loudly on the first malformed row
    Skip,  // log the row to stderr and continue
};

// Reads the raw tab-separated review file (seven columns: uniqueID,
// drugName, condition, review, rating, date, usefulCount; the distributed
// files leave the first header cell empty). The review field may be quoted
// and span embedded tabs or newlines. Ratings given as integer-valued
// decimals ("9.0") are narrowed; anything else is a row error.
std::vector<RawReview> load_raw(const std::filesystem::path& path,
                                BadRowPolicy policy = BadRowPolicy::Abort);

// Decodes HTML entities (named and numeric) to a fixpoint, drops
// non-whitespace control characters, collapses runs of whitespace to one
// space, and trims. Casing is preserved. Total and idempotent.
std::string clean_text(const std::string& raw);

// Rating bins: <=4 negative, 5-8 neutral, >=9 positive.
SentimentClass bin_rating(int rating);

LabeledExample to_labeled(const RawReview& raw);

ClassCounts class_counts(const std::vector<LabeledExample>& examples);

// Per-class sample of floor(fraction * class_count) without replacement,
// deterministic in (input order, fraction, seed). Output preserves input
// order. fraction 1.0 returns the input unchanged.
std::vector<LabeledExample> stratified_subsample(
    const std::vector<LabeledExample>& examples, double fraction,
    std::uint64_t seed);

// Index-level stratified sampler shared with the trainer's validation
// split. Returns ascending indices.
std::vector<std::size_t> stratified_sample_indices(
    const std::vector<int>& labels, double fraction, std::uint64_t seed);

// Prepared-file format: UTF-8 TSV with header
// unique_id \t text \t label \t original_rating. Cleaned text contains no
// tabs or newlines, so fields are written verbatim.
void write_prepared(const std::vector<LabeledExample>& examples,
                    const std::filesystem::path& path);
std::vector<LabeledExample> load_prepared(const std::filesystem::path& path);

} // namespace drugsent
