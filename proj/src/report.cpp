#include "rotadapt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rotadapt/errors.hpp"

namespace rotadapt {

using nlohmann::json;

std::string ReportFragment::to_json() const {
    json j;
    j["method"] = method;
    j["data"] = data_mode;
    j["pair"] = pair;
    j["arch"] = arch;
    j["kshot"] = kshot;
    j["seed"] = seed;
    j["num_classes"] = num_classes;
    j["accuracy"] = accuracy;
    j["val_accuracy"] = val_accuracy;
    j["argv"] = argv;
    j["config"] = config;
    return j.dump();
}

ReportFragment ReportFragment::from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("report fragment: ") + e.what());
    }
    ReportFragment f;
    try {
        j.at("method").get_to(f.method);
        j.at("data").get_to(f.data_mode);
        j.at("pair").get_to(f.pair);
        j.at("arch").get_to(f.arch);
        j.at("kshot").get_to(f.kshot);
        j.at("seed").get_to(f.seed);
        j.at("num_classes").get_to(f.num_classes);
        j.at("accuracy").get_to(f.accuracy);
        j.at("val_accuracy").get_to(f.val_accuracy);
        if (j.contains("argv")) j.at("argv").get_to(f.argv);
        if (j.contains("config")) j.at("config").get_to(f.config);
    } catch (const json::exception& e) {
        throw DataError(std::string("report fragment: ") + e.what());
    }
    return f;
}

void append_fragment(const std::filesystem::path& path, const ReportFragment& f) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw DataError("cannot open report file: " + path.string());
    out << f.to_json() << "\n";
    if (!out) throw DataError("cannot write report file: " + path.string());
}

std::vector<ReportFragment> read_fragments(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report file: " + path.string());
    std::vector<ReportFragment> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        out.push_back(ReportFragment::from_json(line));
    }
    return out;
}

double degradation(double acc_standard, double acc_uncurated) {
    if (!(acc_standard > 0.0))
        throw InputError("degradation: standard accuracy must be positive");
    return 100.0 * (acc_uncurated - acc_standard) / acc_standard;
}

std::vector<ExperimentReport> aggregate_fragments(const std::vector<ReportFragment>& frags) {
    if (frags.empty()) throw InputError("aggregate_fragments: no fragments");
    const int classes = frags.front().num_classes;
    for (const ReportFragment& f : frags)
        if (f.num_classes != classes)
            throw DataError("aggregate_fragments: inconsistent class counts (" +
                            std::to_string(classes) + " vs " +
                            std::to_string(f.num_classes) + ")");

    std::map<std::pair<std::string, std::string>, std::vector<const ReportFragment*>> groups;
    for (const ReportFragment& f : frags) groups[{f.method, f.data_mode}].push_back(&f);

    std::vector<ExperimentReport> rows;
    for (const auto& [key, members] : groups) {
        ExperimentReport r;
        r.method = key.first;
        r.data_mode = key.second;
        r.num_classes = classes;
        std::map<std::string, std::vector<double>> by_pair;
        std::set<uint64_t> seeds;
        for (const ReportFragment* f : members) {
            by_pair[f->pair].push_back(f->accuracy);
            seeds.insert(f->seed);
        }
        double total = 0.0;
        for (const auto& [pair, accs] : by_pair) {
            double s = 0.0;
            for (double a : accs) s += a;
            r.pairs.push_back(pair);
            r.pair_accuracies.push_back(s / accs.size());
            total += r.pair_accuracies.back();
        }
        r.mean_accuracy = total / r.pair_accuracies.size();
        r.seeds.assign(seeds.begin(), seeds.end());
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

const ExperimentReport* find_standard(const std::vector<ExperimentReport>& rows,
                                      const std::string& method) {
    for (const ExperimentReport& r : rows)
        if (r.method == method && r.data_mode == "standard") return &r;
    return nullptr;
}

}  // namespace

std::string render_table(const std::vector<ExperimentReport>& rows) {
    std::vector<std::string> pair_cols;
    for (const ExperimentReport& r : rows)
        for (const std::string& p : r.pairs)
            if (std::find(pair_cols.begin(), pair_cols.end(), p) == pair_cols.end())
                pair_cols.push_back(p);
    std::sort(pair_cols.begin(), pair_cols.end());

    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {"method", "data"};
    header.insert(header.end(), pair_cols.begin(), pair_cols.end());
    header.push_back("mean");
    header.push_back("degradation");
    cells.push_back(header);

    for (const ExperimentReport& r : rows) {
        std::vector<std::string> row = {r.method, r.data_mode};
        for (const std::string& p : pair_cols) {
            auto it = std::find(r.pairs.begin(), r.pairs.end(), p);
            row.push_back(it == r.pairs.end()
                              ? "-"
                              : fmt1(r.pair_accuracies[it - r.pairs.begin()]));
        }
        row.push_back(fmt1(r.mean_accuracy));
        std::string deg = "-";
        if (r.data_mode == "uncurated") {
            if (const ExperimentReport* base = find_standard(rows, r.method)) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%+.1f%%",
                              degradation(base->mean_accuracy, r.mean_accuracy));
                deg = buf;
            }
        }
        row.push_back(deg);
        cells.push_back(std::move(row));
    }

    std::vector<size_t> width(header.size(), 0);
    for (const auto& row : cells)
        for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

    std::ostringstream out;
    for (size_t ri = 0; ri < cells.size(); ++ri) {
        for (size_t i = 0; i < cells[ri].size(); ++i) {
            if (i) out << "  ";
            out << cells[ri][i]
                << std::string(width[i] - cells[ri][i].size(), ' ');
        }
        out << "\n";
        if (ri == 0) {
            size_t total = 0;
            for (size_t w : width) total += w;
            out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
        }
    }
    return out.str();
}

void write_report_jsonl(const std::filesystem::path& path,
                        const std::vector<ExperimentReport>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open report file: " + path.string());
    for (const ExperimentReport& r : rows) {
        json j;
        j["method"] = r.method;
        j["data"] = r.data_mode;
        j["pairs"] = r.pairs;
        j["pair_accuracies"] = r.pair_accuracies;
        j["mean_accuracy"] = r.mean_accuracy;
        j["seeds"] = r.seeds;
        j["num_classes"] = r.num_classes;
        if (r.data_mode == "uncurated") {
            if (const ExperimentReport* base = find_standard(rows, r.method))
                j["degradation"] = degradation(base->mean_accuracy, r.mean_accuracy);
        }
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("cannot write report file: " + path.string());
}

}  // namespace rotadapt
