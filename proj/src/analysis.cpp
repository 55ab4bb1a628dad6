#include "drugsent/analysis.hpp"

#include <sstream>
#include <stdexcept>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

const char* to_string(Severity s) {
    return s == Severity::Severe ? "severe" : "ordinary";
}

const char* to_string(Bucket b) {
    switch (b) {
    case Bucket::BothWrong: return "both_wrong";
    case Bucket::AWrongBRight: return "a_wrong_b_right";
    case Bucket::ARightBWrong: return "a_right_b_wrong";
    case Bucket::BothRight: return "both_right";
    }
    return "?";
}

const char* to_string(PatternTag t) {
    switch (t) {
    case PatternTag::Mislabeled: return "Mislabeled";
    case PatternTag::ContradictoryLanguage: return "ContradictoryLanguage";
    case PatternTag::NonDomainSentiment: return "NonDomainSentiment";
    case PatternTag::MedicalDomainSentiment: return "MedicalDomainSentiment";
    case PatternTag::Other: return "Other";
    }
    return "?";
}

Severity severity_from_string(const std::string& s) {
    if (s == "severe") return Severity::Severe;
    if (s == "ordinary") return Severity::Ordinary;
    throw DataError("unknown severity: \"" + s + "\"");
}

Bucket bucket_from_string(const std::string& s) {
    if (s == "both_wrong") return Bucket::BothWrong;
    if (s == "a_wrong_b_right") return Bucket::AWrongBRight;
    if (s == "a_right_b_wrong") return Bucket::ARightBWrong;
    if (s == "both_right") return Bucket::BothRight;
    throw DataError("unknown bucket: \"" + s + "\"");
}

PatternTag pattern_tag_from_string(const std::string& s) {
    if (s == "Mislabeled") return PatternTag::Mislabeled;
    if (s == "ContradictoryLanguage") return PatternTag::ContradictoryLanguage;
    if (s == "NonDomainSentiment") return PatternTag::NonDomainSentiment;
    if (s == "MedicalDomainSentiment")
        return PatternTag::MedicalDomainSentiment;
    if (s == "Other") return PatternTag::Other;
    throw DataError("unknown pattern tag: \"" + s + "\"");
}

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) +
                                    ": length mismatch: " +
                                    std::to_string(a) + " vs " +
                                    std::to_string(b));
    }
}

bool is_severe_pair(int gold, int pred) {
    return (gold == 2 && pred == 0) || (gold == 0 && pred == 2);
}

} // namespace

std::vector<std::size_t> misclassified_indices(const std::vector<int>& gold,
                                               const std::vector<int>& pred) {
    check_lengths(gold.size(), pred.size(), "misclassified_indices");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] != pred[i]) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> severe_errors(const std::vector<int>& gold,
                                       const std::vector<int>& pred) {
    check_lengths(gold.size(), pred.size(), "severe_errors");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (is_severe_pair(gold[i], pred[i])) out.push_back(i);
    }
    return out;
}

DisagreementPartition disagreement_partition(const std::vector<int>& gold,
                                             const std::vector<int>& pred_a,
                                             const std::vector<int>& pred_b) {
    check_lengths(gold.size(), pred_a.size(), "disagreement_partition");
    check_lengths(gold.size(), pred_b.size(), "disagreement_partition");
    DisagreementPartition p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool a_right = pred_a[i] == gold[i];
        const bool b_right = pred_b[i] == gold[i];
        if (a_right && b_right) p.both_right.push_back(i);
        else if (!a_right && !b_right) p.both_wrong.push_back(i);
        else if (!a_right) p.a_wrong_b_right.push_back(i);
        else p.a_right_b_wrong.push_back(i);
    }
    return p;
}

std::vector<DisagreementRecord> build_disagreement_records(
    const std::vector<LabeledExample>& examples,
    const std::vector<int>& pred_a, const std::vector<int>& pred_b) {
    check_lengths(examples.size(), pred_a.size(), "build_disagreement_records");
    check_lengths(examples.size(), pred_b.size(), "build_disagreement_records");
    std::vector<DisagreementRecord> out;
    out.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const int gold = static_cast<int>(examples[i].label);
        DisagreementRecord r;
        r.unique_id = examples[i].unique_id;
        r.text = examples[i].text;
        r.gold = examples[i].label;
        r.pred_a = sentiment_from_int(pred_a[i]);
        r.pred_b = sentiment_from_int(pred_b[i]);
        const bool a_right = pred_a[i] == gold;
        const bool b_right = pred_b[i] == gold;
        if (a_right && b_right) r.bucket = Bucket::BothRight;
        else if (!a_right && !b_right) r.bucket = Bucket::BothWrong;
        else if (!a_right) r.bucket = Bucket::AWrongBRight;
        else r.bucket = Bucket::ARightBWrong;
        const bool severe = (!a_right && is_severe_pair(gold, pred_a[i])) ||
                            (!b_right && is_severe_pair(gold, pred_b[i]));
        r.severity = severe ? Severity::Severe : Severity::Ordinary;
        out.push_back(std::move(r));
    }
    return out;
}

bool TriageFilter::matches(const DisagreementRecord& r) const {
    if (severity && r.severity != *severity) return false;
    if (bucket && r.bucket != *bucket) return false;
    return true;
}

namespace {

constexpr std::size_t kDisplayCap = 1000;

std::string display_text(const std::string& text) {
    if (text.size() <= kDisplayCap) return text;
    std::string out = text.substr(0, kDisplayCap);
    // avoid splitting a UTF-8 sequence at the cap
    while (!out.empty() &&
           (static_cast<unsigned char>(out.back()) & 0xc0) == 0x80) {
        out.pop_back();
    }
    return out + "…";
}

std::string markdown_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '|') out += "\\|";
        else out += c;
    }
    return out;
}

// "Wrong"/"Correct" columns in the style of the appendix tables.
std::pair<std::string, std::string> wrong_correct(const DisagreementRecord& r,
                                                  const std::string& a_id,
                                                  const std::string& b_id) {
    switch (r.bucket) {
    case Bucket::BothWrong: return {"All", "None"};
    case Bucket::AWrongBRight: return {a_id, b_id};
    case Bucket::ARightBWrong: return {b_id, a_id};
    case Bucket::BothRight: return {"None", "All"};
    }
    return {"?", "?"};
}

} // namespace

void emit_triage_report(const std::vector<DisagreementRecord>& records,
                        const std::filesystem::path& base_path,
                        const TriageFilter& filter,
                        const std::string& model_a_id,
                        const std::string& model_b_id) {
    std::ostringstream tsv;
    tsv << "unique_id\tgold\tpred_a\tpred_b\tseverity\tbucket\tpattern_tag"
           "\ttext\n";
    std::ostringstream md;
    md << "| Review Text | Label | Wrong | Correct | Pattern |\n";
    md << "|---|---|---|---|---|\n";
    for (const DisagreementRecord& r : records) {
        if (!filter.matches(r)) continue;
        if (r.text.find('\t') != std::string::npos ||
            r.text.find('\n') != std::string::npos) {
            throw DataError("triage text contains tab/newline (id " +
                            r.unique_id + "); clean it first");
        }
        tsv << r.unique_id << '\t' << static_cast<int>(r.gold) << '\t'
            << static_cast<int>(r.pred_a) << '\t'
            << static_cast<int>(r.pred_b) << '\t' << to_string(r.severity)
            << '\t' << to_string(r.bucket) << '\t'
            << (r.pattern_tag ? to_string(*r.pattern_tag) : "") << '\t'
            << r.text << '\n';
        const auto [wrong, correct] = wrong_correct(r, model_a_id, model_b_id);
        md << "| " << markdown_escape(display_text(r.text)) << " | "
           << static_cast<int>(r.gold) << " | " << wrong << " | " << correct
           << " | " << (r.pattern_tag ? to_string(*r.pattern_tag) : "")
           << " |\n";
    }
    std::filesystem::path tsv_path = base_path;
    tsv_path += ".tsv";
    std::filesystem::path md_path = base_path;
    md_path += ".md";
    write_file(tsv_path, tsv.str());
    write_file(md_path, md.str());
}

std::vector<DisagreementRecord> ingest_triage_report(
    const std::filesystem::path& tsv_path) {
    const std::string content = read_file(tsv_path);
    std::vector<DisagreementRecord> out;
    std::size_t line_no = 0;
    std::size_t begin = 0;
    while (begin < content.size()) {
        std::size_t end = content.find('\n', begin);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        begin = end + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != "unique_id\tgold\tpred_a\tpred_b\tseverity\tbucket"
                        "\tpattern_tag\ttext") {
                throw DataError(tsv_path.string() + ": bad triage header");
            }
            continue;
        }
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 8) {
            throw DataError(tsv_path.string() + ": line " +
                            std::to_string(line_no) +
                            ": expected 8 columns, found " +
                            std::to_string(fields.size()));
        }
        DisagreementRecord r;
        r.unique_id = fields[0];
        auto parse_class = [&](const std::string& s) {
            auto v = parse_integer_like(s);
            if (!v || *v < 0 || *v > 2) {
                throw DataError(tsv_path.string() + ": line " +
                                std::to_string(line_no) + ": bad class \"" +
                                s + "\"");
            }
            return sentiment_from_int(*v);
        };
        r.gold = parse_class(fields[1]);
        r.pred_a = parse_class(fields[2]);
        r.pred_b = parse_class(fields[3]);
        r.severity = severity_from_string(fields[4]);
        r.bucket = bucket_from_string(fields[5]);
        const std::string tag = trim(fields[6]);
        if (!tag.empty()) r.pattern_tag = pattern_tag_from_string(tag);
        r.text = fields[7];
        out.push_back(std::move(r));
    }
    return out;
}

std::map<PatternTag, std::size_t> tag_frequencies(
    const std::vector<DisagreementRecord>& records) {
    std::map<PatternTag, std::size_t> freqs;
    for (const DisagreementRecord& r : records) {
        if (r.pattern_tag) ++freqs[*r.pattern_tag];
    }
    return freqs;
}

std::string format_tag_summary(
    const std::map<PatternTag, std::size_t>& freqs) {
    std::ostringstream out;
    std::size_t total = 0;
    for (const auto& [tag, count] : freqs) {
        out << to_string(tag) << "\t" << count << "\n";
        total += count;
    }
    out << "total\t" << total << "\n";
    return out.str();
}

} // namespace drugsent
