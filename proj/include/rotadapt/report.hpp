#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rotadapt {

// One finished run, appended as a JSON line to a fragment file. Accuracies
// are percentages; argv + config make the run replayable.
struct ReportFragment {
    std::string method;                 // canonical tag, e.g. "ROT+ENT", "KD(ROT)"
    std::string data_mode = "standard";  // standard | uncurated
    std::string pair = "synthetic";
    std::string arch = "small";
    int kshot = 0;
    uint64_t seed = 1;
    int num_classes = 0;
    double accuracy = 0.0;
    double val_accuracy = 0.0;
    std::vector<std::string> argv;
    std::string config;

    std::string to_json() const;
    static ReportFragment from_json(const std::string& line);
};

void append_fragment(const std::filesystem::path& path, const ReportFragment& f);
std::vector<ReportFragment> read_fragments(const std::filesystem::path& path);

// One table row: a method+data mode, accuracies averaged per pair then over
// pairs. mean_accuracy always equals the arithmetic mean of pair_accuracies.
struct ExperimentReport {
    std::string method;
    std::string data_mode;
    std::vector<std::string> pairs;
    std::vector<double> pair_accuracies;
    double mean_accuracy = 0.0;
    std::vector<uint64_t> seeds;
    int num_classes = 0;
};

// Percent change of the uncurated accuracy relative to the standard one,
// signed: 100 * (acc_uncurated - acc_standard) / acc_standard.
double degradation(double acc_standard, double acc_uncurated);

// Groups fragments by (method, data mode); every fragment must agree on the
// class count.
std::vector<ExperimentReport> aggregate_fragments(const std::vector<ReportFragment>& frags);

// Aligned text table; uncurated rows show degradation against the matching
// standard row when one exists.
std::string render_table(const std::vector<ExperimentReport>& rows);

// LF-delimited JSON, one record per row.
void write_report_jsonl(const std::filesystem::path& path,
                        const std::vector<ExperimentReport>& rows);

}  // namespace rotadapt
