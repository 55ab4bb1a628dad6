#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drugsent/corpus.hpp"

namespace drugsent {

enum class Severity { Severe, Ordinary };

enum class Bucket {
    BothWrong,
    AWrongBRight,
    ARightBWrong,
    BothRight,
};

// Error-pattern vocabulary for the human triage pass; records start
// untagged and a person fills the column offline.
enum class PatternTag {
    Mislabeled,
    ContradictoryLanguage,
    NonDomainSentiment,
    MedicalDomainSentiment,
    Other,
};

const char* to_string(Severity s);
const char* to_string(Bucket b);
const char* to_string(PatternTag t);
Severity severity_from_string(const std::string& s);
Bucket bucket_from_string(const std::string& s);
PatternTag pattern_tag_from_string(const std::string& s);

struct DisagreementRecord {
    std::string unique_id;
    std::string text;
    SentimentClass gold = SentimentClass::Neutral;
    SentimentClass pred_a = SentimentClass::Neutral;
    SentimentClass pred_b = SentimentClass::Neutral;
    Severity severity = Severity::Ordinary;
    Bucket bucket = Bucket::BothRight;
    std::optional<PatternTag> pattern_tag; // empty until a human fills it

    bool operator==(const DisagreementRecord&) const = default;
};

// Indices where gold != pred.
std::vector<std::size_t> misclassified_indices(const std::vector<int>& gold,
                                               const std::vector<int>& pred);

// Indices confusing the extreme classes: (gold 2, pred 0) or (gold 0, pred 2).
std::vector<std::size_t> severe_errors(const std::vector<int>& gold,
                                       const std::vector<int>& pred);

struct DisagreementPartition {
    std::vector<std::size_t> both_right;
    std::vector<std::size_t> both_wrong;
    std::vector<std::size_t> a_wrong_b_right;
    std::vector<std::size_t> a_right_b_wrong;
};

DisagreementPartition disagreement_partition(const std::vector<int>& gold,
                                             const std::vector<int>& pred_a,
                                             const std::vector<int>& pred_b);

// Derives bucket and severity per example. A record is severe when any
// wrong model's prediction confuses the extreme classes.
std::vector<DisagreementRecord> build_disagreement_records(
    const std::vector<LabeledExample>& examples, const std::vector<int>& pred_a,
    const std::vector<int>& pred_b);

struct TriageFilter {
    std::optional<Severity> severity;
    std::optional<Bucket> bucket;

    bool matches(const DisagreementRecord& r) const;
};

// Writes <base>.tsv (machine-readable, full text) and <base>.md (markdown
// table mirroring the appendix layout, text capped at 1000 chars).
void emit_triage_report(const std::vector<DisagreementRecord>& records,
                        const std::filesystem::path& base_path,
                        const TriageFilter& filter = {},
                        const std::string& model_a_id = "model_a",
                        const std::string& model_b_id = "model_b");

// Re-ingests a (possibly human-edited) triage TSV.
std::vector<DisagreementRecord> ingest_triage_report(
    const std::filesystem::path& tsv_path);

// Counts only tagged records; values sum to the tagged-record count.
std::map<PatternTag, std::size_t> tag_frequencies(
    const std::vector<DisagreementRecord>& records);

std::string format_tag_summary(
    const std::map<PatternTag, std::size_t>& freqs);

} // namespace drugsent
