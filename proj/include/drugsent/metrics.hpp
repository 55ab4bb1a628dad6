#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drugsent {

// rows = gold class, columns = predicted class
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, 3>, 3> cells{};

    std::uint64_t total() const;
    std::uint64_t row_sum(int gold) const;
    std::uint64_t col_sum(int pred) const;
    bool operator==(const ConfusionMatrix&) const = default;
};

struct PrfTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool operator==(const PrfTriple&) const = default;
};

struct EvaluationReport {
    ConfusionMatrix confusion;
    std::array<PrfTriple, 3> per_class{};
    PrfTriple macro;
    std::uint64_t n_examples = 0;
    std::string model_id;
    std::string split;
    bool operator==(const EvaluationReport&) const = default;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& gold,
                                 const std::vector<int>& pred);

// Zero denominators yield 0 for the affected metric.
std::array<PrfTriple, 3> per_class_prf(const ConfusionMatrix& confusion);

// Unweighted mean over all 3 classes regardless of support. Macro F1 is
// the mean of per-class F1s, not the harmonic mean of macro P and R.
PrfTriple macro_prf(const std::array<PrfTriple, 3>& per_class);

EvaluationReport evaluate(const std::vector<int>& gold,
                          const std::vector<int>& pred,
                          const std::string& model_id,
                          const std::string& split);

// Round-half-up at two decimals on the decimal rendering ("0.805" -> "0.81").
std::string round2_half_up(double value);

// JSON report file: model_id, split, n_examples, confusion, per_class,
// macro at full precision plus a 2-decimal "presentation" block.
void write_report(const EvaluationReport& report,
                  const std::filesystem::path& path);
EvaluationReport read_report(const std::filesystem::path& path);

std::string format_report_text(const EvaluationReport& report);

} // namespace drugsent
