#include "drugsent/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "drugsent/errors.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (const auto& row : cells) {
        for (std::uint64_t c : row) n += c;
    }
    return n;
}

std::uint64_t ConfusionMatrix::row_sum(int gold) const {
    std::uint64_t n = 0;
    for (std::uint64_t c : cells[static_cast<std::size_t>(gold)]) n += c;
    return n;
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
    std::uint64_t n = 0;
    for (const auto& row : cells) n += row[static_cast<std::size_t>(pred)];
    return n;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& gold,
                                 const std::vector<int>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument(
            "gold and prediction lengths differ: " +
            std::to_string(gold.size()) + " vs " + std::to_string(pred.size()));
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || gold[i] > 2 || pred[i] < 0 || pred[i] > 2) {
            throw std::invalid_argument("class out of range at position " +
                                        std::to_string(i));
        }
        ++m.cells[static_cast<std::size_t>(gold[i])]
                 [static_cast<std::size_t>(pred[i])];
    }
    return m;
}

std::array<PrfTriple, 3> per_class_prf(const ConfusionMatrix& confusion) {
    std::array<PrfTriple, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const auto tp = static_cast<double>(
            confusion.cells[static_cast<std::size_t>(c)]
                           [static_cast<std::size_t>(c)]);
        const auto col = static_cast<double>(confusion.col_sum(c));
        const auto row = static_cast<double>(confusion.row_sum(c));
        PrfTriple& t = out[static_cast<std::size_t>(c)];
        t.precision = col > 0.0 ? tp / col : 0.0;
        t.recall = row > 0.0 ? tp / row : 0.0;
        const double denom = t.precision + t.recall;
        t.f1 = denom > 0.0 ? 2.0 * t.precision * t.recall / denom : 0.0;
    }
    return out;
}

PrfTriple macro_prf(const std::array<PrfTriple, 3>& per_class) {
    PrfTriple m;
    for (const PrfTriple& t : per_class) {
        m.precision += t.precision / 3.0;
        m.recall += t.recall / 3.0;
        m.f1 += t.f1 / 3.0;
    }
    return m;
}

EvaluationReport evaluate(const std::vector<int>& gold,
                          const std::vector<int>& pred,
                          const std::string& model_id,
                          const std::string& split) {
    EvaluationReport r;
    r.confusion = confusion_matrix(gold, pred);
    r.per_class = per_class_prf(r.confusion);
    r.macro = macro_prf(r.per_class);
    r.n_examples = r.confusion.total();
    r.model_id = model_id;
    r.split = split;
    return r;
}

std::string round2_half_up(double value) {
    // Render with fixed decimals first, then round the decimal string so
    // 0.805 presents as "0.81" regardless of its binary representation.
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12f", value);
    std::string s(buf);
    const std::size_t dot = s.find('.');
    std::string digits = s.substr(0, dot) + s.substr(dot + 1); // no dot
    const std::size_t keep = dot + 2;          // digits kept before rounding
    bool round_up = digits[keep] >= '5';
    digits.resize(keep);
    if (round_up) {
        for (std::size_t i = digits.size(); i-- > 0;) {
            if (digits[i] == '9') {
                digits[i] = '0';
                if (i == 0) digits.insert(digits.begin(), '1');
            } else {
                ++digits[i];
                break;
            }
        }
    }
    const std::size_t int_len = digits.size() - 2;
    return digits.substr(0, int_len) + "." + digits.substr(int_len);
}

namespace {

nlohmann::json triple_to_json(const PrfTriple& t) {
    return {{"precision", t.precision},
            {"recall", t.recall},
            {"f1", t.f1}};
}

PrfTriple triple_from_json(const nlohmann::json& j) {
    PrfTriple t;
    t.precision = j.at("precision").get<double>();
    t.recall = j.at("recall").get<double>();
    t.f1 = j.at("f1").get<double>();
    return t;
}

nlohmann::json presentation_triple(const PrfTriple& t) {
    return {{"precision", round2_half_up(t.precision)},
            {"recall", round2_half_up(t.recall)},
            {"f1", round2_half_up(t.f1)}};
}

} // namespace

void write_report(const EvaluationReport& report,
                  const std::filesystem::path& path) {
    nlohmann::json j;
    j["model_id"] = report.model_id;
    j["split"] = report.split;
    j["n_examples"] = report.n_examples;
    auto confusion = nlohmann::json::array();
    for (const auto& row : report.confusion.cells) {
        confusion.push_back(nlohmann::json(row));
    }
    j["confusion"] = confusion;
    auto per_class = nlohmann::json::array();
    for (const auto& t : report.per_class) {
        per_class.push_back(triple_to_json(t));
    }
    j["per_class"] = per_class;
    j["macro"] = triple_to_json(report.macro);
    j["presentation"] = {
        {"macro", presentation_triple(report.macro)},
        {"per_class",
         nlohmann::json::array({presentation_triple(report.per_class[0]),
                                presentation_triple(report.per_class[1]),
                                presentation_triple(report.per_class[2])})},
    };
    write_file(path, j.dump(2) + "\n");
}

EvaluationReport read_report(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    EvaluationReport r;
    try {
        r.model_id = j.at("model_id").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.n_examples = j.at("n_examples").get<std::uint64_t>();
        const auto& confusion = j.at("confusion");
        for (std::size_t g = 0; g < 3; ++g) {
            for (std::size_t p = 0; p < 3; ++p) {
                r.confusion.cells[g][p] =
                    confusion.at(g).at(p).get<std::uint64_t>();
            }
        }
        const auto& per_class = j.at("per_class");
        for (std::size_t c = 0; c < 3; ++c) {
            r.per_class[c] = triple_from_json(per_class.at(c));
        }
        r.macro = triple_from_json(j.at("macro"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return r;
}

std::string format_report_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << "model: " << report.model_id << "  split: " << report.split
        << "  n=" << report.n_examples << "\n";
    out << "confusion (rows gold, cols predicted):\n";
    static const char* names[3] = {"negative", "neutral", "positive"};
    for (int g = 0; g < 3; ++g) {
        out << "  " << names[g] << ":";
        for (int p = 0; p < 3; ++p) {
            out << ' '
                << report.confusion.cells[static_cast<std::size_t>(g)]
                                         [static_cast<std::size_t>(p)];
        }
        out << "\n";
    }
    for (int c = 0; c < 3; ++c) {
        const auto& t = report.per_class[static_cast<std::size_t>(c)];
        out << "  " << names[c] << ": P=" << round2_half_up(t.precision)
            << " R=" << round2_half_up(t.recall)
            << " F1=" << round2_half_up(t.f1) << "\n";
    }
    out << "macro: P=" << round2_half_up(report.macro.precision)
        << " R=" << round2_half_up(report.macro.recall)
        << " F1=" << round2_half_up(report.macro.f1) << "\n";
    return out.str();
}

} // namespace drugsent
