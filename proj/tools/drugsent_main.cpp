#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "drugsent/errors.hpp"
#include "drugsent/pipeline.hpp"
#include "drugsent/util.hpp"

namespace {

using namespace drugsent;

struct PrepareArgs {
    std::string train_file, test_file, out;
    double fraction = 1.0;
    std::uint64_t seed = 42;
    std::string on_bad_row = "abort";
};

struct TrainArgs {
    std::string config, data, out;
};

struct EvaluateArgs {
    std::string model_dir, data, out;
};

struct CompareArgs {
    std::string model_a, model_b, data, out;
    std::string severity, bucket;
};

struct ReportArgs {
    std::string triage, out;
};

int dispatch(int argc, char** argv) {
    CLI::App app{"drug-review sentiment benchmark pipeline"};
    app.require_subcommand(1);
    app.footer("environment: DRUGSENT_CHECKPOINTS points at the directory "
               "holding pretrained encoder checkpoints");

    PrepareArgs prepare_args;
    auto* prepare = app.add_subcommand(
        "prepare", "ingest raw review files, clean, bin, subsample");
    prepare->add_option("--train-file", prepare_args.train_file,
                        "raw train TSV")->required();
    prepare->add_option("--test-file", prepare_args.test_file,
                        "raw test TSV")->required();
    prepare->add_option("--out", prepare_args.out, "output directory")
        ->required();
    prepare->add_option("--fraction", prepare_args.fraction,
                        "stratified subsample fraction in (0,1]");
    prepare->add_option("--seed", prepare_args.seed, "subsample seed");
    prepare->add_option("--on-bad-row", prepare_args.on_bad_row,
                        "abort (default) or skip malformed rows");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train one model per config");
    train->add_option("--config", train_args.config, "run config file")
        ->required();
    train->add_option("--data", train_args.data, "prepared train TSV")
        ->required();
    train->add_option("--out", train_args.out,
                      "checkpoint directory (default: config output.dir)");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand(
        "evaluate", "score a trained model on a prepared split");
    evaluate->add_option("--model-dir", eval_args.model_dir,
                         "checkpoint directory")->required();
    evaluate->add_option("--data", eval_args.data, "prepared TSV")
        ->required();
    evaluate->add_option("--out", eval_args.out, "report directory")
        ->required();

    CompareArgs compare_args;
    auto* compare = app.add_subcommand(
        "compare", "disagreement triage between two trained models");
    compare->add_option("--model-a", compare_args.model_a,
                        "checkpoint directory A")->required();
    compare->add_option("--model-b", compare_args.model_b,
                        "checkpoint directory B")->required();
    compare->add_option("--data", compare_args.data, "prepared TSV")
        ->required();
    compare->add_option("--out", compare_args.out, "output directory")
        ->required();
    compare->add_option("--severity", compare_args.severity,
                        "filter: severe or ordinary");
    compare->add_option("--bucket", compare_args.bucket,
                        "filter: both_wrong, a_wrong_b_right, "
                        "a_right_b_wrong, both_right");

    ReportArgs report_args;
    auto* report = app.add_subcommand(
        "report", "tag-frequency summary of an edited triage file");
    report->add_option("--triage", report_args.triage, "triage TSV")
        ->required();
    report->add_option("--out", report_args.out,
                       "write the summary here as well");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (prepare->parsed()) {
        BadRowPolicy policy;
        if (prepare_args.on_bad_row == "abort") policy = BadRowPolicy::Abort;
        else if (prepare_args.on_bad_row == "skip")
            policy = BadRowPolicy::Skip;
        else throw UsageError("--on-bad-row must be abort or skip");
        if (!(prepare_args.fraction > 0.0) || prepare_args.fraction > 1.0) {
            throw UsageError("--fraction must be in (0,1]");
        }
        run_prepare(prepare_args.train_file, prepare_args.test_file,
                    prepare_args.out, prepare_args.fraction,
                    prepare_args.seed, policy);
        return kExitOk;
    }
    if (train->parsed()) {
        RunConfig config = parse_config(train_args.config);
        std::string out = train_args.out.empty() ? config.output_dir
                                                 : train_args.out;
        if (out.empty()) {
            throw UsageError(
                "no output directory: pass --out or set output.dir");
        }
        config.output_dir = out;
        run_train(config, train_args.data, out);
        return kExitOk;
    }
    if (evaluate->parsed()) {
        run_evaluate(eval_args.model_dir, eval_args.data, eval_args.out);
        return kExitOk;
    }
    if (compare->parsed()) {
        TriageFilter filter;
        if (!compare_args.severity.empty()) {
            filter.severity = severity_from_string(compare_args.severity);
        }
        if (!compare_args.bucket.empty()) {
            filter.bucket = bucket_from_string(compare_args.bucket);
        }
        run_compare(compare_args.model_a, compare_args.model_b,
                    compare_args.data, compare_args.out, filter);
        return kExitOk;
    }
    if (report->parsed()) {
        const std::string summary = run_report(report_args.triage);
        std::cout << summary;
        if (!report_args.out.empty()) {
            write_file(report_args.out, summary);
        }
        return kExitOk;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
