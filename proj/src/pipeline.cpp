#include "drugsent/pipeline.hpp"

#include <chrono>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "drugsent/encoders.hpp"
#include "drugsent/errors.hpp"
#include "drugsent/trainer.hpp"
#include "drugsent/util.hpp"

namespace drugsent {

namespace {

using Clock = std::chrono::steady_clock;

long long elapsed_ms(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               Clock::now() - start)
        .count();
}

std::string counts_line(const std::string& name, const ClassCounts& c) {
    std::ostringstream out;
    out << name << "\t" << c.negative << "\t" << c.neutral << "\t"
        << c.positive << "\t" << c.total() << "\n";
    return out.str();
}

std::vector<LabeledExample> prepare_split(const std::filesystem::path& file,
                                          double fraction, std::uint64_t seed,
                                          BadRowPolicy policy) {
    std::vector<LabeledExample> examples;
    for (const RawReview& raw : load_raw(file, policy)) {
        examples.push_back(to_labeled(raw));
    }
    return stratified_subsample(examples, fraction, seed);
}

std::vector<EncodedExample> encode_all(
    const Model& model, const std::vector<LabeledExample>& examples) {
    std::vector<EncodedExample> out;
    out.reserve(examples.size());
    for (const LabeledExample& ex : examples) {
        out.push_back(model.encode(ex.text, ex.label));
    }
    return out;
}

std::vector<int> gold_labels(const std::vector<LabeledExample>& examples) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(static_cast<int>(ex.label));
    return out;
}

} // namespace

void write_run_manifest(const std::filesystem::path& out_dir,
                        const std::string& command,
                        const std::string& config_hash,
                        const std::string& data_fingerprint,
                        long long duration_ms) {
    std::ostringstream out;
    out << "command=" << command << "\n";
    out << "config_hash=" << config_hash << "\n";
    out << "data_fingerprint=" << data_fingerprint << "\n";
    out << "duration_ms=" << duration_ms << "\n";
    write_file(out_dir / "run_manifest.txt", out.str());
}

PrepareResult run_prepare(const std::filesystem::path& train_file,
                          const std::filesystem::path& test_file,
                          const std::filesystem::path& out_dir,
                          double fraction, std::uint64_t seed,
                          BadRowPolicy policy) {
    const auto start = Clock::now();
    std::filesystem::create_directories(out_dir);

    PrepareResult result;
    const auto train = prepare_split(train_file, fraction, seed, policy);
    const auto test = prepare_split(test_file, fraction, seed, policy);
    result.train_counts = class_counts(train);
    result.test_counts = class_counts(test);
    result.train_out = out_dir / "train.tsv";
    result.test_out = out_dir / "test.tsv";
    write_prepared(train, result.train_out);
    write_prepared(test, result.test_out);

    std::string counts = "segment\tnegative\tneutral\tpositive\ttotal\n";
    counts += counts_line("train", result.train_counts);
    counts += counts_line("test", result.test_counts);
    write_file(out_dir / "counts.txt", counts);
    std::cout << counts;

    const std::string fingerprint = fnv1a64_hex(
        file_fingerprint(result.train_out) + file_fingerprint(result.test_out));
    write_run_manifest(out_dir, "prepare",
                       fnv1a64_hex("fraction=" + std::to_string(fraction) +
                                   " seed=" + std::to_string(seed)),
                       fingerprint, elapsed_ms(start));
    return result;
}

void run_train(const RunConfig& config, const std::filesystem::path& data_file,
               const std::filesystem::path& out_dir) {
    const auto start = Clock::now();
    std::filesystem::create_directories(out_dir);
    set_global_seed(config.train.seed);

    const auto examples = load_prepared(data_file);
    if (examples.empty()) {
        throw DataError(data_file.string() + ": no training examples");
    }

    std::unique_ptr<Model> model;
    if (config.model.kind == ModelKind::CnnStatic) {
        if (config.embeddings_file.empty()) {
            throw UsageError(
                "cnn_static needs model.embeddings_file in the config");
        }
        // Restrict the table to tokens that occur in the training split.
        std::unordered_set<std::string> corpus_tokens;
        for (const LabeledExample& ex : examples) {
            for (const std::string& token : static_tokenize(ex.text)) {
                corpus_tokens.insert(token);
            }
        }
        const StaticEmbeddingTable table = load_static_embeddings(
            config.embeddings_file, config.model.seed, corpus_tokens);
        model = build_cnn(config.model, table);
    } else {
        model = build_model(config.model);
    }

    const auto encoded = encode_all(*model, examples);
    const TrainHistory history = train(*model, encoded, config.train);

    save_checkpoint(*model, out_dir, config.train, history.stopped_epoch,
                    file_fingerprint(data_file));
    write_history(history, out_dir / "history.tsv");
    write_resolved_config(config, out_dir / "config.resolved");
    write_run_manifest(out_dir, "train", fnv1a64_hex(render_config(config)),
                       file_fingerprint(data_file), elapsed_ms(start));
    std::cout << "trained " << to_string(config.model.kind) << " for "
              << history.stopped_epoch << " epoch(s), best epoch "
              << history.best_epoch << "\n";
}

EvaluationReport run_evaluate(const std::filesystem::path& model_dir,
                              const std::filesystem::path& data_file,
                              const std::filesystem::path& out_dir) {
    const auto start = Clock::now();
    std::filesystem::create_directories(out_dir);

    const auto model = load_checkpoint(model_dir);
    const auto examples = load_prepared(data_file);
    const auto encoded = encode_all(*model, examples);
    const std::vector<int> pred = predict_classes(*model, encoded);

    EvaluationReport report =
        evaluate(gold_labels(examples), pred, to_string(model->config().kind),
                 data_file.stem().string());
    write_report(report, out_dir / "report.json");
    std::cout << format_report_text(report);
    write_run_manifest(out_dir, "evaluate",
                       fnv1a64_hex(model_dir.string()),
                       file_fingerprint(data_file), elapsed_ms(start));
    return report;
}

CompareResult run_compare(const std::filesystem::path& model_a_dir,
                          const std::filesystem::path& model_b_dir,
                          const std::filesystem::path& data_file,
                          const std::filesystem::path& out_dir,
                          const TriageFilter& filter) {
    const auto start = Clock::now();
    std::filesystem::create_directories(out_dir);

    const auto model_a = load_checkpoint(model_a_dir);
    const auto model_b = load_checkpoint(model_b_dir);
    const auto examples = load_prepared(data_file);

    const std::vector<int> pred_a =
        predict_classes(*model_a, encode_all(*model_a, examples));
    const std::vector<int> pred_b =
        predict_classes(*model_b, encode_all(*model_b, examples));

    // disambiguate same-kind comparisons by directory name
    std::string id_a = to_string(model_a->config().kind);
    std::string id_b = to_string(model_b->config().kind);
    if (id_a == id_b) {
        const auto name_a =
            std::filesystem::absolute(model_a_dir).lexically_normal()
                .filename().string();
        const auto name_b =
            std::filesystem::absolute(model_b_dir).lexically_normal()
                .filename().string();
        if (!name_a.empty() && !name_b.empty() && name_a != name_b) {
            id_a = name_a;
            id_b = name_b;
        }
    }
    const auto records = build_disagreement_records(examples, pred_a, pred_b);
    emit_triage_report(records, out_dir / "triage", filter, id_a, id_b);

    CompareResult result;
    for (const DisagreementRecord& r : records) {
        if (!filter.matches(r)) continue;
        switch (r.bucket) {
        case Bucket::BothRight: ++result.both_right; break;
        case Bucket::BothWrong: ++result.both_wrong; break;
        case Bucket::AWrongBRight: ++result.a_wrong_b_right; break;
        case Bucket::ARightBWrong: ++result.a_right_b_wrong; break;
        }
        if (r.severity == Severity::Severe) ++result.severe;
    }
    result.triage_tsv = out_dir / "triage.tsv";

    std::ostringstream summary;
    summary << "model_a\t" << id_a << "\n"
            << "model_b\t" << id_b << "\n"
            << "both_right\t" << result.both_right << "\n"
            << "both_wrong\t" << result.both_wrong << "\n"
            << "a_wrong_b_right\t" << result.a_wrong_b_right << "\n"
            << "a_right_b_wrong\t" << result.a_right_b_wrong << "\n"
            << "severe\t" << result.severe << "\n";
    write_file(out_dir / "summary.txt", summary.str());
    std::cout << summary.str();

    write_run_manifest(out_dir, "compare",
                       fnv1a64_hex(model_a_dir.string() + "|" +
                                   model_b_dir.string()),
                       file_fingerprint(data_file), elapsed_ms(start));
    return result;
}

std::string run_report(const std::filesystem::path& triage_tsv) {
    const auto records = ingest_triage_report(triage_tsv);
    std::size_t tagged = 0;
    for (const auto& r : records) {
        if (r.pattern_tag) ++tagged;
    }
    std::ostringstream out;
    out << "records\t" << records.size() << "\n";
    out << "tagged\t" << tagged << "\n";
    out << format_tag_summary(tag_frequencies(records));
    return out.str();
}

} // namespace drugsent
