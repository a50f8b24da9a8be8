#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotadapt/cli.hpp"
#include "rotadapt/data.hpp"
#include "rotadapt/errors.hpp"
#include "rotadapt/report.hpp"
#include "test_util.hpp"

using namespace rotadapt;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

// The subcommands print progress to stdout; keep the test log quiet.
struct Capture {
    std::ostringstream out, err;
    std::streambuf* old_out;
    std::streambuf* old_err;
    Capture()
        : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
    ~Capture() {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
    }
};

int run_quiet(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    Capture cap;
    const int rc = cli::run(args);
    if (out_text) *out_text = cap.out.str();
    return rc;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).generic_string();
        if (rel == "meta.json") continue;  // records argv, which differs per --out
        std::ifstream f(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        out[rel] = ss.str();
    }
    return out;
}

std::vector<std::string> tiny_build_args(const fs::path& out, uint64_t seed) {
    return {"build-data",   "--out",        out.string(),
            "--synthetic",  "--classes",    "3",
            "--distractors", "2",           "--per-class",
            "8",            "--source-test-per-class", "2",
            "--distractor-per-class", "4",  "--image-size",
            "16",           "--kshot",      "1",
            "--val-per-class", "2",         "--test-fraction",
            "0.25",         "--seed",       std::to_string(seed)};
}

ReportFragment frag(const std::string& method, const std::string& data,
                    const std::string& pair, uint64_t seed, double acc) {
    ReportFragment f;
    f.method = method;
    f.data_mode = data;
    f.pair = pair;
    f.seed = seed;
    f.num_classes = 8;
    f.accuracy = acc;
    f.val_accuracy = acc - 1.0;
    return f;
}

}  // namespace

TEST_CASE("method tags canonicalize case-insensitively") {
    CHECK(cli::canonical_method("s+t") == "S+T");
    CHECK(cli::canonical_method("rot") == "ROT");
    CHECK(cli::canonical_method("Rot+Ent") == "ROT+ENT");
    CHECK(cli::canonical_method("rot+vat") == "ROT+VAT");
    CHECK(cli::canonical_method("ROT+ENT+VAT") == "ROT+ENT+VAT");
    CHECK(cli::canonical_method("jig+ent") == "JIG+ENT");
    CHECK(cli::canonical_method("kd(rot)") == "KD(ROT)");
    CHECK(cli::canonical_method("Kd(Rot+Ent)") == "KD(ROT+ENT)");
    try {
        cli::canonical_method("mme");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("S+T") != std::string::npos);
    }
    CHECK_THROWS_AS(cli::canonical_method("kd()"), ConfigError);
    CHECK_THROWS_AS(cli::canonical_method("kd(bogus)"), ConfigError);
    CHECK_THROWS_AS(cli::canonical_method("kd(kd(rot))"), ConfigError);
}

TEST_CASE("method tags map to the documented loss patterns") {
    TrainConfig cfg;
    cfg.weights.lambda_ssl = 5.0;  // stale values must be overwritten
    cfg.weights.lambda_vat = 5.0;
    cli::apply_method("S+T", "small", cfg);
    CHECK(cfg.weights.lambda_ssl == 0.0);
    CHECK(cfg.weights.lambda_ent == 0.0);
    CHECK(cfg.weights.lambda_vat == 0.0);
    CHECK(cfg.weights.lambda_s == 1.0);
    CHECK(cfg.weights.lambda_t == 1.0);

    cli::apply_method("ROT", "small", cfg);
    CHECK(cfg.weights.lambda_ssl == 1.0);
    CHECK(cfg.weights.lambda_ent == 0.0);
    CHECK(cfg.pretext == PretextKind::rotation);

    cli::apply_method("ROT+ENT", "small", cfg);
    CHECK(cfg.weights.lambda_ent == 0.01);
    cli::apply_method("ROT+ENT", "large", cfg);
    CHECK(cfg.weights.lambda_ent == 0.1);

    cli::apply_method("ROT+VAT", "small", cfg);
    CHECK(cfg.weights.lambda_vat == 0.01);
    CHECK(cfg.weights.lambda_ent == 0.0);

    cli::apply_method("ROT+ENT+VAT", "large", cfg);
    CHECK(cfg.weights.lambda_ssl == 1.0);
    CHECK(cfg.weights.lambda_ent == 0.1);
    CHECK(cfg.weights.lambda_vat == 0.01);

    cli::apply_method("JIG+ENT", "small", cfg);
    CHECK(cfg.pretext == PretextKind::jigsaw);
    CHECK(cfg.weights.lambda_ssl == 1.0);
    CHECK(cfg.weights.lambda_ent == 0.01);

    CHECK_THROWS_AS(cli::apply_method("KD(ROT)", "small", cfg), ConfigError);
}

TEST_CASE("degradation is the signed relative accuracy change in percent") {
    auto round1 = [](double v) { return std::round(v * 10.0) / 10.0; };
    CHECK(round1(degradation(47.2, 45.7)) == doctest::Approx(-3.2));
    CHECK(round1(degradation(75.9, 68.6)) == doctest::Approx(-9.6));
    CHECK(degradation(50.0, 50.0) == 0.0);
    CHECK(degradation(40.0, 50.0) == doctest::Approx(25.0));
    CHECK_THROWS_AS(degradation(0.0, 10.0), InputError);
    CHECK_THROWS_AS(degradation(-5.0, 10.0), InputError);
}

TEST_CASE("report fragments round-trip through json lines") {
    ReportFragment f = frag("KD(ROT)", "uncurated", "clipart->sketch", 7, 61.25);
    f.arch = "large";
    f.kshot = 3;
    f.argv = {"train", "--method", "rot"};
    f.config = "total_iterations=100\n";
    ReportFragment back = ReportFragment::from_json(f.to_json());
    CHECK(back.method == f.method);
    CHECK(back.data_mode == f.data_mode);
    CHECK(back.pair == f.pair);
    CHECK(back.arch == f.arch);
    CHECK(back.kshot == f.kshot);
    CHECK(back.seed == f.seed);
    CHECK(back.num_classes == f.num_classes);
    CHECK(back.accuracy == doctest::Approx(f.accuracy).epsilon(1e-12));
    CHECK(back.val_accuracy == doctest::Approx(f.val_accuracy).epsilon(1e-12));
    CHECK(back.argv == f.argv);
    CHECK(back.config == f.config);

    CHECK_THROWS_AS(ReportFragment::from_json("not json"), DataError);
    CHECK_THROWS_AS(ReportFragment::from_json("{\"method\": \"ROT\"}"), DataError);
}

TEST_CASE("fragment files append and read back in order") {
    auto dir = scratch_dir("fragments");
    const auto path = dir / "frags.jsonl";
    append_fragment(path, frag("ROT", "standard", "a", 1, 70.0));
    append_fragment(path, frag("ROT", "standard", "a", 2, 72.0));
    auto frags = read_fragments(path);
    REQUIRE(frags.size() == 2);
    CHECK(frags[0].seed == 1);
    CHECK(frags[1].accuracy == doctest::Approx(72.0));
    CHECK_THROWS_AS(read_fragments(dir / "none.jsonl"), DataError);
}

TEST_CASE("aggregation averages per pair, then across pairs") {
    std::vector<ReportFragment> frags = {
        frag("ROT", "standard", "a", 1, 70.0), frag("ROT", "standard", "a", 2, 72.0),
        frag("ROT", "standard", "b", 1, 80.0), frag("ROT", "uncurated", "a", 1, 64.0),
        frag("ROT", "uncurated", "b", 1, 72.0),
    };
    auto rows = aggregate_fragments(frags);
    REQUIRE(rows.size() == 2);
    const ExperimentReport* std_row = nullptr;
    const ExperimentReport* unc_row = nullptr;
    for (const auto& r : rows)
        (r.data_mode == "standard" ? std_row : unc_row) = &r;
    REQUIRE(std_row);
    REQUIRE(unc_row);

    REQUIRE(std_row->pairs == std::vector<std::string>({"a", "b"}));
    CHECK(std_row->pair_accuracies[0] == doctest::Approx(71.0).epsilon(1e-6));
    CHECK(std_row->pair_accuracies[1] == doctest::Approx(80.0).epsilon(1e-6));
    CHECK(std_row->mean_accuracy == doctest::Approx(75.5).epsilon(1e-6));
    CHECK(std_row->seeds == std::vector<uint64_t>({1, 2}));
    CHECK(unc_row->mean_accuracy == doctest::Approx(68.0).epsilon(1e-6));

    auto bad = frags;
    bad[1].num_classes = 5;
    CHECK_THROWS_AS(aggregate_fragments(bad), DataError);
    CHECK_THROWS_AS(aggregate_fragments({}), InputError);
}

TEST_CASE("the table shows degradation for uncurated rows") {
    std::vector<ReportFragment> frags = {
        frag("ROT", "standard", "a", 1, 75.5),
        frag("ROT", "uncurated", "a", 1, 68.0),
        frag("S+T", "standard", "a", 1, 60.0),
    };
    const std::string table = render_table(aggregate_fragments(frags));
    CHECK(table.find("degradation") != std::string::npos);
    CHECK(table.find("-9.9%") != std::string::npos);  // 100 * (68 - 75.5) / 75.5
    // Standard rows carry no degradation entry.
    std::istringstream lines(table);
    std::string line;
    while (std::getline(lines, line))
        if (line.find("S+T") != std::string::npos)
            CHECK(line.find('%') == std::string::npos);
}

TEST_CASE("report jsonl rows carry degradation only when it applies") {
    auto dir = scratch_dir("report_jsonl");
    std::vector<ReportFragment> frags = {
        frag("ROT", "standard", "a", 1, 80.0),
        frag("ROT", "uncurated", "a", 1, 72.0),
    };
    const auto path = dir / "rows.jsonl";
    write_report_jsonl(path, aggregate_fragments(frags));
    std::ifstream in(path);
    std::string line;
    int with_deg = 0, rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        auto j = nlohmann::json::parse(line);
        if (j.contains("degradation")) {
            ++with_deg;
            CHECK(j["data"] == "uncurated");
            CHECK(j["degradation"].get<double>() == doctest::Approx(-10.0).epsilon(1e-9));
        }
    }
    CHECK(rows == 2);
    CHECK(with_deg == 1);
}

TEST_CASE("the dispatcher maps failures to documented exit codes") {
    CHECK(run_quiet({}) == 2);
    CHECK(run_quiet({"bogus"}) == 2);
    CHECK(run_quiet({"train"}) == 2);  // missing required flags
    CHECK(run_quiet({"--help"}) == 0);
    auto dir = scratch_dir("cli_codes");
    CHECK(run_quiet({"train", "--root", (dir / "nope").string(), "--out",
                     (dir / "out").string()}) == 3);  // no dataset metadata
    CHECK(run_quiet({"build-data", "--out", (dir / "d").string(), "--synthetic",
                     "--source", "x"}) == 2);  // conflicting inputs
    CHECK(run_quiet({"report", (dir / "missing.jsonl").string()}) == 3);
}

TEST_CASE("build-data is deterministic for a fixed seed") {
    auto dir = scratch_dir("cli_det");
    REQUIRE(run_quiet(tiny_build_args(dir / "r1", 5)) == 0);
    REQUIRE(run_quiet(tiny_build_args(dir / "r2", 5)) == 0);
    REQUIRE(run_quiet(tiny_build_args(dir / "r3", 6)) == 0);
    auto t1 = tree_bytes(dir / "r1"), t2 = tree_bytes(dir / "r2"), t3 = tree_bytes(dir / "r3");
    CHECK(!t1.empty());
    CHECK(t1 == t2);
    CHECK(t1 != t3);  // a new seed reshuffles splits and re-renders images
}

TEST_CASE("build-data writes the contracted split files") {
    auto dir = scratch_dir("cli_splits");
    const fs::path root = dir / "data";
    REQUIRE(run_quiet(tiny_build_args(root, 9)) == 0);

    auto labeled = read_split_file(root / "splits/target_labeled_k1.txt");
    CHECK(labeled.size() == 3);  // one shot per class
    std::set<int> classes;
    for (const auto& l : labeled) classes.insert(l.label);
    CHECK(classes == std::set<int>({0, 1, 2}));

    auto unl = read_split_file(root / "splits/target_unlabeled.txt");
    CHECK(unl.size() == 12);  // (8 - 2 test - 2 val) per class, shots included
    for (const auto& l : unl) CHECK(l.label == -1);

    auto unc = read_split_file(root / "splits/target_unlabeled_uncurated.txt");
    CHECK(unc.size() == 20);  // + 2 distractor classes x 4
    for (const auto& l : unc) CHECK(l.label == -1);
    int distractor_lines = 0;
    for (const auto& l : unc)
        if (l.path.find("/e/") != std::string::npos || l.path.find("/f/") != std::string::npos)
            ++distractor_lines;  // glyphs 3 and 4 serve as the distractor classes
    CHECK(distractor_lines == 8);

    auto val = read_split_file(root / "splits/target_val.txt");
    CHECK(val.size() == 6);
    auto test = read_split_file(root / "splits/target_test.txt");
    CHECK(test.size() == 6);
    auto src = read_split_file(root / "splits/source_train.txt");
    CHECK(src.size() == 24);
    auto srct = read_split_file(root / "splits/source_test.txt");
    CHECK(srct.size() == 6);

    std::ifstream meta(root / "meta.json");
    REQUIRE(meta.good());
    auto j = nlohmann::json::parse(meta);
    CHECK(j["num_classes"] == 3);
    CHECK(j["kshot"] == 1);
    CHECK(j["uncurated"] == true);
    CHECK(j["image_size"] == 16);
}

TEST_CASE("train, eval, and report run end to end on a tiny root") {
    auto dir = scratch_dir("cli_e2e");
    const fs::path root = dir / "data";
    REQUIRE(run_quiet(tiny_build_args(root, 3)) == 0);

    const fs::path run1 = dir / "run_st";
    std::string out;
    REQUIRE(run_quiet({"train", "--root", root.string(), "--out", run1.string(),
                       "--method", "s+t", "--iters", "2", "--eval-every", "1",
                       "--batch", "2", "--seed", "4"},
                      &out) == 0);
    CHECK(out.find("iter=1 total=") != std::string::npos);
    CHECK(out.find("test acc=") != std::string::npos);
    REQUIRE(fs::exists(run1 / "stage1.ckpt"));
    REQUIRE(fs::exists(run1 / "train.log"));

    auto frags = read_fragments(run1 / "fragments.jsonl");
    REQUIRE(frags.size() == 1);
    CHECK(frags[0].method == "S+T");
    CHECK(frags[0].pair == "synthetic");
    CHECK(frags[0].kshot == 1);
    CHECK(frags[0].num_classes == 3);
    CHECK(frags[0].accuracy >= 0.0);
    CHECK(frags[0].accuracy <= 100.0);

    out.clear();
    REQUIRE(run_quiet({"eval", "--ckpt", (run1 / "stage1.ckpt").string(), "--root",
                       root.string()},
                      &out) == 0);
    CHECK(out.find("acc=") != std::string::npos);
    // Appending a fragment from eval requires a method tag.
    CHECK(run_quiet({"eval", "--ckpt", (run1 / "stage1.ckpt").string(), "--root",
                     root.string(), "--report", (dir / "f.jsonl").string()}) == 2);

    const fs::path run2 = dir / "run_rot";
    REQUIRE(run_quiet({"train", "--root", root.string(), "--out", run2.string(),
                       "--method", "rot", "--iters", "2", "--eval-every", "2",
                       "--batch", "2", "--seed", "4"}) == 0);

    const fs::path kd = dir / "run_kd";
    out.clear();
    REQUIRE(run_quiet({"distill", "--root", root.string(), "--out", kd.string(),
                       "--teachers", (run2 / "stage1.ckpt").string(), "--method", "rot",
                       "--epochs", "1", "--batch", "4", "--init", "teacher"},
                      &out) == 0);
    CHECK(out.find("kd iter=1 total=") != std::string::npos);
    REQUIRE(fs::exists(kd / "student.ckpt"));
    auto kd_frags = read_fragments(kd / "fragments.jsonl");
    REQUIRE(kd_frags.size() == 1);
    CHECK(kd_frags[0].method == "KD(ROT)");

    out.clear();
    REQUIRE(run_quiet({"report", (run1 / "fragments.jsonl").string(),
                       (run2 / "fragments.jsonl").string(),
                       (kd / "fragments.jsonl").string(), "--out",
                       (dir / "report.jsonl").string()},
                      &out) == 0);
    CHECK(out.find("method") != std::string::npos);
    CHECK(out.find("S+T") != std::string::npos);
    CHECK(out.find("KD(ROT)") != std::string::npos);
    REQUIRE(fs::exists(dir / "report.jsonl"));
    REQUIRE(fs::exists(dir / "report.meta.json"));
}

TEST_CASE("uda mode trains from source labels alone") {
    auto dir = scratch_dir("cli_uda");
    const fs::path root = dir / "data";
    REQUIRE(run_quiet(tiny_build_args(root, 8)) == 0);
    const fs::path run = dir / "run";
    REQUIRE(run_quiet({"train", "--root", root.string(), "--out", run.string(),
                       "--method", "rot", "--mode", "uda", "--iters", "2",
                       "--eval-every", "2", "--batch", "2"}) == 0);
    auto frags = read_fragments(run / "fragments.jsonl");
    REQUIRE(frags.size() == 1);
    CHECK(frags[0].kshot == 0);  // no labeled target pool in play
    const std::string cfg = frags[0].config;
    CHECK(cfg.find("lambda_s=0.5") != std::string::npos);
    CHECK(cfg.find("lambda_t=0") != std::string::npos);
}
