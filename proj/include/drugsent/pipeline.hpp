#pragma once

#include <filesystem>
#include <string>

#include "drugsent/analysis.hpp"
#include "drugsent/config.hpp"
#include "drugsent/corpus.hpp"
#include "drugsent/metrics.hpp"

namespace drugsent {

// One function per CLI stage; stages communicate through files only.

struct PrepareResult {
    ClassCounts train_counts;
    ClassCounts test_counts;
    std::filesystem::path train_out;
    std::filesystem::path test_out;
};

PrepareResult run_prepare(const std::filesystem::path& train_file,
                          const std::filesystem::path& test_file,
                          const std::filesystem::path& out_dir,
                          double fraction = 1.0, std::uint64_t seed = 42,
                          BadRowPolicy policy = BadRowPolicy::Abort);

// Trains per config on a prepared TSV and saves a checkpoint directory.
void run_train(const RunConfig& config, const std::filesystem::path& data_file,
               const std::filesystem::path& out_dir);

EvaluationReport run_evaluate(const std::filesystem::path& model_dir,
                              const std::filesystem::path& data_file,
                              const std::filesystem::path& out_dir);

struct CompareResult {
    std::size_t both_right = 0;
    std::size_t both_wrong = 0;
    std::size_t a_wrong_b_right = 0;
    std::size_t a_right_b_wrong = 0;
    std::size_t severe = 0;
    std::filesystem::path triage_tsv;
};

CompareResult run_compare(const std::filesystem::path& model_a_dir,
                          const std::filesystem::path& model_b_dir,
                          const std::filesystem::path& data_file,
                          const std::filesystem::path& out_dir,
                          const TriageFilter& filter = {});

// Re-ingests an edited triage TSV and renders the tag-frequency summary.
std::string run_report(const std::filesystem::path& triage_tsv);

// Stage metadata written into every output directory.
void write_run_manifest(const std::filesystem::path& out_dir,
                        const std::string& command,
                        const std::string& config_hash,
                        const std::string& data_fingerprint,
                        long long duration_ms);

} // namespace drugsent
