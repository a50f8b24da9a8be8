#include "rotadapt/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rotadapt/checkpoint.hpp"
#include "rotadapt/config_file.hpp"
#include "rotadapt/data.hpp"
#include "rotadapt/distill.hpp"
#include "rotadapt/errors.hpp"
#include "rotadapt/image_io.hpp"
#include "rotadapt/model.hpp"
#include "rotadapt/report.hpp"
#include "rotadapt/synthetic.hpp"
#include "rotadapt/trainer.hpp"

namespace rotadapt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt6(double v) {
    char b[40];
    std::snprintf(b, sizeof(b), "%.6g", v);
    return b;
}

std::string fmt17(double v) {
    char b[48];
    std::snprintf(b, sizeof(b), "%.17g", v);
    return b;
}

void parse_args(CLI::App& app, std::vector<std::string> args, const std::string& cmd) {
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        throw;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(cmd + ": " + e.what());
    }
}

struct DataRoot {
    fs::path root;
    std::string pair;
    int num_classes = 0;
    int image_size = 0;
    int kshot = 0;
};

DataRoot open_data_root(const fs::path& root) {
    const fs::path meta_path = root / "meta.json";
    std::ifstream in(meta_path, std::ios::binary);
    if (!in) throw DataError("missing dataset metadata: " + meta_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("unreadable dataset metadata " + meta_path.string() + ": " + e.what());
    }
    DataRoot dr;
    dr.root = root;
    try {
        dr.pair = j.at("pair").get<std::string>();
        dr.num_classes = j.at("num_classes").get<int>();
        dr.image_size = j.at("image_size").get<int>();
        dr.kshot = j.at("kshot").get<int>();
    } catch (const json::exception& e) {
        throw DataError("incomplete dataset metadata " + meta_path.string() + ": " + e.what());
    }
    return dr;
}

Pool load_split(const DataRoot& dr, const std::string& name) {
    const Domain d = name.rfind("source", 0) == 0 ? Domain::source : Domain::target;
    return load_domain_folder(dr.root, dr.root / "splits" / (name + ".txt"), dr.image_size, d);
}

std::vector<SplitLine> pool_lines(const Pool& pool) {
    std::vector<SplitLine> lines;
    lines.reserve(pool.size());
    for (const Example& ex : pool)
        lines.push_back({ex.id, ex.label ? *ex.label : -1});
    return lines;
}

void write_pool_images(const fs::path& root, const Pool& pool) {
    for (const Example& ex : pool) {
        const fs::path p = root / ex.id;
        fs::create_directories(p.parent_path());
        write_ppm(p, ex.image);
    }
}

std::ofstream open_log(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open log file: " + path.string());
    return out;
}

std::vector<std::string> with_cmd(const std::string& cmd, const std::vector<std::string>& args) {
    std::vector<std::string> v = {cmd};
    v.insert(v.end(), args.begin(), args.end());
    return v;
}

std::string serialize_distill(const DistillConfig& c) {
    std::ostringstream o;
    o << "epochs=" << c.epochs << "\n"
      << "base_lr=" << fmt17(c.base_lr) << "\n"
      << "lr_drop=" << fmt17(c.lr_drop) << "\n"
      << "lr_drop_every=" << c.lr_drop_every << "\n"
      << "momentum=" << fmt17(c.momentum) << "\n"
      << "weight_decay=" << fmt17(c.weight_decay) << "\n"
      << "batch_size=" << c.batch_size << "\n"
      << "seed=" << c.seed << "\n"
      << "select_best_val=" << (c.select_best_val ? 1 : 0) << "\n";
    return o.str();
}

void log_counters(const std::function<void(const std::string&)>& log,
                  const PoolAccessCounters& counters) {
    std::ostringstream o;
    o << "pool reads:";
    for (const auto& [name, n] : counters.reads) o << " " << name << "=" << n;
    log(o.str());
}

constexpr uint64_t kSaltModel = 0x6D646C;    // "mdl"
constexpr uint64_t kSaltSplit = 0x73706C;    // "spl"
constexpr uint64_t kSaltStudent = 0x737475;  // "stu"

}  // namespace

std::string canonical_method(const std::string& method) {
    std::string m;
    for (char c : method) m.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    static const std::set<std::string> base = {"S+T",     "ROT",         "ROT+ENT",
                                               "ROT+VAT", "ROT+ENT+VAT", "JIG+ENT"};
    if (base.count(m)) return m;
    if (m.size() > 4 && m.rfind("KD(", 0) == 0 && m.back() == ')') {
        const std::string inner = m.substr(3, m.size() - 4);
        if (base.count(inner)) return "KD(" + inner + ")";
    }
    throw ConfigError("unknown method tag '" + method +
                      "' (expected S+T, ROT, ROT+ENT, ROT+VAT, ROT+ENT+VAT, JIG+ENT, "
                      "or KD(<tag>))");
}

void apply_method(const std::string& canonical, const std::string& arch, TrainConfig& cfg) {
    const double ent_default = arch == "large" ? 0.1 : 0.01;
    cfg.pretext = PretextKind::rotation;
    cfg.weights.lambda_ssl = 0.0;
    cfg.weights.lambda_ent = 0.0;
    cfg.weights.lambda_vat = 0.0;
    if (canonical == "S+T") {
    } else if (canonical == "ROT") {
        cfg.weights.lambda_ssl = 1.0;
    } else if (canonical == "ROT+ENT") {
        cfg.weights.lambda_ssl = 1.0;
        cfg.weights.lambda_ent = ent_default;
    } else if (canonical == "ROT+VAT") {
        cfg.weights.lambda_ssl = 1.0;
        cfg.weights.lambda_vat = 0.01;
    } else if (canonical == "ROT+ENT+VAT") {
        cfg.weights.lambda_ssl = 1.0;
        cfg.weights.lambda_ent = ent_default;
        cfg.weights.lambda_vat = 0.01;
    } else if (canonical == "JIG+ENT") {
        cfg.pretext = PretextKind::jigsaw;
        cfg.weights.lambda_ssl = 1.0;
        cfg.weights.lambda_ent = 0.01;
    } else {
        throw ConfigError("method " + canonical + " is not a stage-1 training tag");
    }
}

int cmd_build_data(const std::vector<std::string>& args) {
    CLI::App app{"Emit a dataset root: images, split files, metadata"};
    std::string out, source_dir, target_dir, distractor_dir, pair_name;
    bool synthetic = false, overlap = false;
    int kshot = 3, val_per_class = 3, image_size = 32;
    int classes = 8, distractors = 4, per_class = 40, source_test_per_class = 10;
    int distractor_per_class = 40;
    double test_fraction = 0.2, noise_deg = 15.0;
    uint64_t seed = 1;
    app.add_option("--out", out, "output dataset root")->required();
    app.add_flag("--synthetic", synthetic, "generate the synthetic glyph pair");
    app.add_option("--source", source_dir, "source folder (folder-per-class, PPM)");
    app.add_option("--target", target_dir, "target folder (folder-per-class, PPM)");
    app.add_option("--distractor-dir", distractor_dir, "extra-class folder for the uncurated pool");
    app.add_option("--pair", pair_name, "domain-pair name used in reports");
    app.add_option("--kshot", kshot, "labeled target examples per class");
    app.add_option("--val-per-class", val_per_class, "validation examples per class");
    app.add_option("--test-fraction", test_fraction, "target test fraction carved per class");
    app.add_flag("--overlap", overlap, "MME-style overlap: test pool doubles as unlabeled pool");
    app.add_option("--seed", seed, "generation + split seed");
    app.add_option("--image-size", image_size, "square image side");
    app.add_option("--classes", classes, "synthetic: number of classes");
    app.add_option("--distractors", distractors, "synthetic: number of distractor classes");
    app.add_option("--per-class", per_class, "synthetic: train images per class and domain");
    app.add_option("--source-test-per-class", source_test_per_class,
                   "synthetic: held-out source images per class");
    app.add_option("--distractor-per-class", distractor_per_class,
                   "synthetic: images per distractor class");
    app.add_option("--noise-deg", noise_deg, "synthetic: orientation jitter, degrees");
    parse_args(app, args, "build-data");

    if (!synthetic && (source_dir.empty() || target_dir.empty()))
        throw ConfigError("build-data: pass --synthetic or both --source and --target");
    if (synthetic && (!source_dir.empty() || !target_dir.empty()))
        throw ConfigError("build-data: --synthetic conflicts with --source/--target");

    Pool source_train, source_test, target, distractor_pool;
    std::vector<std::string> class_names, distractor_names;
    if (synthetic) {
        SyntheticSpec sp;
        sp.num_classes = classes;
        sp.num_distractors = distractors;
        sp.image_size = image_size;
        sp.source_per_class = per_class;
        sp.source_test_per_class = source_test_per_class;
        sp.target_per_class = per_class;
        sp.distractor_per_class = distractor_per_class;
        sp.orientation_noise_deg = noise_deg;
        sp.seed = seed;
        SyntheticPair pair = generate_synthetic_pair(sp);
        source_train = std::move(pair.source_train);
        source_test = std::move(pair.source_test);
        target = std::move(pair.target);
        distractor_pool = std::move(pair.distractors);
        for (int g = 0; g < classes; ++g) class_names.push_back(glyph_names()[g]);
        for (int d = 0; d < distractors; ++d)
            distractor_names.push_back(glyph_names()[classes + d]);
        if (pair_name.empty()) pair_name = "synthetic";
    } else {
        auto scan = [&](const fs::path& dir, Domain domain, int label_base,
                        std::vector<std::string>& names) {
            if (!fs::is_directory(dir))
                throw DataError("build-data: not a directory: " + dir.string());
            std::vector<fs::path> class_dirs;
            for (const auto& e : fs::directory_iterator(dir))
                if (e.is_directory()) class_dirs.push_back(e.path());
            std::sort(class_dirs.begin(), class_dirs.end());
            if (class_dirs.empty())
                throw DataError("build-data: no class folders under " + dir.string());
            Pool pool;
            const char* domain_name = domain == Domain::source ? "source" : "target";
            for (size_t ci = 0; ci < class_dirs.size(); ++ci) {
                names.push_back(class_dirs[ci].filename().string());
                std::vector<fs::path> files;
                for (const auto& e : fs::directory_iterator(class_dirs[ci]))
                    if (e.is_regular_file()) files.push_back(e.path());
                std::sort(files.begin(), files.end());
                for (const fs::path& f : files) {
                    if (f.extension() != ".ppm")
                        throw DataError("build-data: unsupported image (PPM P6 only): " +
                                        f.string());
                    Example ex;
                    ex.image = resize_bilinear(center_crop_square(read_ppm(f)), image_size,
                                               image_size);
                    ex.label = label_base + static_cast<int>(ci);
                    ex.domain = domain;
                    ex.id = std::string(domain_name) + "/" + names.back() + "/" +
                            f.stem().string() + ".ppm";
                    pool.push_back(std::move(ex));
                }
            }
            return pool;
        };
        source_train = scan(source_dir, Domain::source, 0, class_names);
        std::vector<std::string> target_names;
        target = scan(target_dir, Domain::target, 0, target_names);
        if (target_names != class_names)
            throw DataError("build-data: source and target class folders differ");
        if (!distractor_dir.empty())
            distractor_pool = scan(distractor_dir, Domain::target,
                                   static_cast<int>(class_names.size()), distractor_names);
        if (pair_name.empty()) pair_name = "custom";
    }
    const int num_classes = static_cast<int>(class_names.size());

    KShotOptions opts;
    opts.k = kshot;
    opts.val_per_class = val_per_class;
    opts.test_fraction = test_fraction;
    opts.mme_overlap = overlap;
    Rng split_rng = Rng(seed).derive(kSaltSplit);
    DatasetSplit split = build_kshot_split(target, opts, split_rng);

    const fs::path root(out);
    fs::create_directories(root / "splits");
    write_pool_images(root, source_train);
    write_pool_images(root, source_test);
    write_pool_images(root, target);
    write_pool_images(root, distractor_pool);

    write_split_file(root / "splits/source_train.txt", pool_lines(source_train));
    write_split_file(root / "splits/source_test.txt", pool_lines(source_test));
    write_split_file(root / ("splits/target_labeled_k" + std::to_string(kshot) + ".txt"),
                     pool_lines(split.labeled_target));
    write_split_file(root / "splits/target_val.txt", pool_lines(split.val_target));
    write_split_file(root / "splits/target_unlabeled.txt", pool_lines(split.unlabeled_target));
    write_split_file(root / "splits/target_test.txt", pool_lines(split.test_target));
    const bool uncurated = !distractor_pool.empty();
    if (uncurated) {
        Pool unc = build_uncurated_pool(split.unlabeled_target, distractor_pool, num_classes);
        write_split_file(root / "splits/target_unlabeled_uncurated.txt", pool_lines(unc));
    }

    json meta;
    meta["format_version"] = 1;
    meta["pair"] = pair_name;
    meta["num_classes"] = num_classes;
    meta["class_names"] = class_names;
    meta["distractor_names"] = distractor_names;
    meta["image_size"] = image_size;
    meta["kshot"] = kshot;
    meta["val_per_class"] = val_per_class;
    meta["test_fraction"] = test_fraction;
    meta["overlap"] = overlap;
    meta["uncurated"] = uncurated;
    meta["seed"] = seed;
    meta["argv"] = with_cmd("build-data", args);
    std::ofstream mf(root / "meta.json", std::ios::binary);
    if (!mf) throw DataError("cannot write " + (root / "meta.json").string());
    mf << meta.dump(2) << "\n";

    std::cout << "dataset root " << root.string() << ": " << num_classes << " classes, "
              << source_train.size() << " source train, " << target.size() << " target, "
              << distractor_pool.size() << " distractor images\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& args) {
    CLI::App app{"Stage-1 training: supervised + self-supervised objective"};
    std::string root, out, method = "s+t", mode = "ssda", arch = "small";
    std::string data_mode = "standard", config_path, report_path, pretext_domains;
    int kshot = -1, iters = -1, eval_every = -1, batch = -1;
    uint64_t seed = 1;
    double l_s = 0, l_t = 0, l_ssl = 0, l_ent = 0, l_vat = 0, vat_eps = 0;
    double lr_trunk = 0, lr_heads = 0;
    app.add_option("--root", root, "dataset root from build-data")->required();
    app.add_option("--out", out, "run output directory")->required();
    app.add_option("--method", method, "S+T | ROT | ROT+ENT | ROT+VAT | ROT+ENT+VAT | JIG+ENT");
    app.add_option("--mode", mode, "ssda | uda")->check(CLI::IsMember({"ssda", "uda"}));
    app.add_option("--arch", arch, "architecture preset");
    app.add_option("--data", data_mode, "unlabeled pool flavor")
        ->check(CLI::IsMember({"standard", "uncurated"}));
    app.add_option("--kshot", kshot, "k of the labeled target split (default: dataset meta)");
    app.add_option("--seed", seed, "training seed");
    app.add_option("--config", config_path, "key=value config file (flags override)");
    app.add_option("--iters", iters, "total iterations");
    app.add_option("--eval-every", eval_every, "validation interval");
    app.add_option("--batch", batch, "batch size for all three pools");
    app.add_option("--lambda-s", l_s, "source supervised weight");
    app.add_option("--lambda-t", l_t, "target supervised weight");
    app.add_option("--lambda-ssl", l_ssl, "self-supervised weight");
    app.add_option("--lambda-ent", l_ent, "entropy-minimization weight");
    app.add_option("--lambda-vat", l_vat, "VAT weight");
    app.add_option("--vat-epsilon", vat_eps, "VAT perturbation radius");
    app.add_option("--lr-trunk", lr_trunk, "trunk base learning rate");
    app.add_option("--lr-heads", lr_heads, "head base learning rate");
    app.add_option("--pretext-domains", pretext_domains, "target_only | source_and_target");
    app.add_option("--report", report_path, "fragment file (default <out>/fragments.jsonl)");
    parse_args(app, args, "train");

    DataRoot dr = open_data_root(root);
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    const std::string tag = canonical_method(method);
    if (tag.rfind("KD(", 0) == 0)
        throw ConfigError("train: " + tag + " is produced by the distill command");
    apply_method(tag, arch, cfg);
    if (mode == "uda") {
        cfg.weights.lambda_s = 0.5;
        cfg.weights.lambda_t = 0.0;
        if (cfg.weights.lambda_ent > 0) cfg.weights.lambda_ent = 0.01;
        if (cfg.weights.lambda_vat > 0) cfg.weights.lambda_vat = 0.01;
    }
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--iters")) cfg.total_iterations = iters;
    if (app.count("--eval-every")) cfg.eval_every = eval_every;
    if (app.count("--batch"))
        cfg.batch_source = cfg.batch_target = cfg.batch_unlabeled = batch;
    if (app.count("--lambda-s")) cfg.weights.lambda_s = l_s;
    if (app.count("--lambda-t")) cfg.weights.lambda_t = l_t;
    if (app.count("--lambda-ssl")) cfg.weights.lambda_ssl = l_ssl;
    if (app.count("--lambda-ent")) cfg.weights.lambda_ent = l_ent;
    if (app.count("--lambda-vat")) cfg.weights.lambda_vat = l_vat;
    if (app.count("--vat-epsilon")) cfg.vat.epsilon = vat_eps;
    if (app.count("--lr-trunk")) cfg.lr_trunk = lr_trunk;
    if (app.count("--lr-heads")) cfg.lr_heads = lr_heads;
    if (app.count("--pretext-domains"))
        cfg.pretext_domains = pretext_domains_from_string(pretext_domains);
    cfg.validate();

    const int k = kshot >= 0 ? kshot : dr.kshot;
    const bool uses_unlabeled = cfg.weights.lambda_ssl > 0 || cfg.weights.lambda_ent > 0 ||
                                cfg.weights.lambda_vat > 0;
    DatasetSplit split;
    split.labeled_source = load_split(dr, "source_train");
    if (cfg.weights.lambda_t > 0)
        split.labeled_target = load_split(dr, "target_labeled_k" + std::to_string(k));
    if (uses_unlabeled)
        split.unlabeled_target = load_split(dr, data_mode == "uncurated"
                                                    ? "target_unlabeled_uncurated"
                                                    : "target_unlabeled");
    split.val_target = load_split(dr, "target_val");
    split.test_target = load_split(dr, "target_test");

    const int pretext_outputs =
        cfg.pretext == PretextKind::jigsaw ? cfg.jigsaw_perm_count : 4;
    ModelSpec spec = desk_model_spec(arch, dr.num_classes, pretext_outputs);
    spec.in_h = spec.in_w = dr.image_size;
    Model model(spec);
    Rng init_rng = Rng(cfg.seed).derive(kSaltModel);
    model.init_params(init_rng);

    const fs::path out_dir(out);
    std::ofstream logf = open_log(out_dir / "train.log");
    PoolAccessCounters counters;
    TrainHooks hooks;
    hooks.log = [&](const std::string& s) {
        std::cout << s << "\n";
        logf << s << "\n";
    };
    hooks.checkpoint_path = out_dir / "stage1.ckpt";
    hooks.counters = &counters;
    Checkpoint best = train_stage1(cfg, split, model, hooks);

    Model best_model = best.to_model();
    const double acc = evaluate(best_model, split.test_target);
    hooks.log("test acc=" + fmt6(acc));
    log_counters(hooks.log, counters);

    ReportFragment frag;
    frag.method = tag;
    frag.data_mode = data_mode;
    frag.pair = dr.pair;
    frag.arch = arch;
    frag.kshot = cfg.weights.lambda_t > 0 ? k : 0;
    frag.seed = cfg.seed;
    frag.num_classes = dr.num_classes;
    frag.accuracy = 100.0 * acc;
    frag.val_accuracy = 100.0 * best.val_accuracy;
    frag.argv = with_cmd("train", args);
    frag.config = serialize_config(cfg);
    append_fragment(report_path.empty() ? out_dir / "fragments.jsonl" : fs::path(report_path),
                    frag);
    return 0;
}

int cmd_distill(const std::vector<std::string>& args) {
    CLI::App app{"Stage-2 self-distillation on unlabeled target data"};
    std::string root, out, method = "rot", data_mode = "standard", init = "random";
    std::string report_path;
    std::vector<std::string> teacher_paths;
    DistillConfig dc;
    bool select_best_val = false;
    int kshot = -1;
    app.add_option("--root", root, "dataset root from build-data")->required();
    app.add_option("--out", out, "run output directory")->required();
    app.add_option("--teachers", teacher_paths, "teacher checkpoint(s)")
        ->required()
        ->expected(-1);
    app.add_option("--method", method, "base method tag for reporting (e.g. ROT)");
    app.add_option("--data", data_mode, "unlabeled pool flavor")
        ->check(CLI::IsMember({"standard", "uncurated"}));
    app.add_option("--epochs", dc.epochs, "distillation epochs");
    app.add_option("--lr", dc.base_lr, "base learning rate");
    app.add_option("--lr-drop", dc.lr_drop, "learning-rate drop factor");
    app.add_option("--lr-drop-every", dc.lr_drop_every, "epochs between drops");
    app.add_option("--momentum", dc.momentum, "SGD momentum");
    app.add_option("--weight-decay", dc.weight_decay, "SGD weight decay");
    app.add_option("--batch", dc.batch_size, "batch size");
    app.add_option("--seed", dc.seed, "shuffle + init seed");
    app.add_option("--init", init, "student init: random | teacher")
        ->check(CLI::IsMember({"random", "teacher"}));
    app.add_flag("--select-best-val", select_best_val, "return best-val epoch, not the last");
    app.add_option("--kshot", kshot, "k recorded in the report fragment");
    app.add_option("--report", report_path, "fragment file (default <out>/fragments.jsonl)");
    parse_args(app, args, "distill");
    dc.select_best_val = select_best_val;

    DataRoot dr = open_data_root(root);
    std::vector<Checkpoint> cks;
    for (const std::string& p : teacher_paths) {
        if (!fs::exists(p)) throw DataError("distill: teacher checkpoint not found: " + p);
        cks.push_back(load_checkpoint(p));
    }
    for (const Checkpoint& c : cks)
        if (!(c.spec == cks.front().spec))
            throw ConfigError("distill: teacher architectures differ");

    std::vector<Model> teachers;
    teachers.reserve(cks.size());
    for (const Checkpoint& c : cks) teachers.push_back(c.to_model());
    std::vector<Model*> tptr;
    for (Model& m : teachers) tptr.push_back(&m);

    Model student(cks.front().spec);
    if (init == "teacher") {
        student = teachers.front();
    } else {
        Rng srng = Rng(dc.seed).derive(kSaltStudent);
        student.init_params(srng);
    }

    Pool unlabeled = load_split(dr, data_mode == "uncurated" ? "target_unlabeled_uncurated"
                                                             : "target_unlabeled");
    Pool val = load_split(dr, "target_val");
    Pool test = load_split(dr, "target_test");

    const fs::path out_dir(out);
    std::ofstream logf = open_log(out_dir / "distill.log");
    PoolAccessCounters counters;
    DistillHooks hooks;
    hooks.log = [&](const std::string& s) {
        std::cout << s << "\n";
        logf << s << "\n";
    };
    hooks.checkpoint_path = out_dir / "student.ckpt";
    hooks.eval_pool = &val;
    hooks.counters = &counters;
    Checkpoint result = distill_train(dc, unlabeled, tptr, student, hooks);

    Model student_model = result.to_model();
    const double acc = evaluate(student_model, test);
    hooks.log("test acc=" + fmt6(acc));
    log_counters(hooks.log, counters);

    std::string base = canonical_method(method);
    if (base.rfind("KD(", 0) != 0) base = "KD(" + base + ")";

    ReportFragment frag;
    frag.method = base;
    frag.data_mode = data_mode;
    frag.pair = dr.pair;
    frag.arch = cks.front().spec.arch;
    frag.kshot = kshot >= 0 ? kshot : dr.kshot;
    frag.seed = dc.seed;
    frag.num_classes = dr.num_classes;
    frag.accuracy = 100.0 * acc;
    frag.val_accuracy = 100.0 * result.val_accuracy;
    frag.argv = with_cmd("distill", args);
    frag.config = serialize_distill(dc);
    append_fragment(report_path.empty() ? out_dir / "fragments.jsonl" : fs::path(report_path),
                    frag);
    return 0;
}

int cmd_eval(const std::vector<std::string>& args) {
    CLI::App app{"Evaluate a checkpoint on a labeled split"};
    std::string ckpt, root, split_name = "target_test", data_mode = "standard", method;
    std::string report_path;
    app.add_option("--ckpt", ckpt, "checkpoint path")->required();
    app.add_option("--root", root, "dataset root from build-data")->required();
    app.add_option("--split", split_name, "split name (default target_test)");
    app.add_option("--data", data_mode, "data mode recorded in the fragment")
        ->check(CLI::IsMember({"standard", "uncurated"}));
    app.add_option("--method", method, "method tag for the report fragment");
    app.add_option("--report", report_path, "fragment file to append to");
    parse_args(app, args, "eval");

    DataRoot dr = open_data_root(root);
    Checkpoint c = load_checkpoint(ckpt);
    Pool pool = load_split(dr, split_name);
    for (const Example& ex : pool) {
        if (!ex.label)
            throw DataError("eval: split " + split_name + " has unlabeled entries");
        if (*ex.label < 0 || *ex.label >= c.spec.num_classes)
            throw DataError("eval: split label " + std::to_string(*ex.label) +
                            " outside checkpoint classes [0, " +
                            std::to_string(c.spec.num_classes) + ")");
    }
    Model model = c.to_model();
    const double acc = evaluate(model, pool);
    std::cout << "acc=" << fmt6(acc) << "\n";

    if (!report_path.empty()) {
        if (method.empty())
            throw ConfigError("eval: --method is required when appending with --report");
        ReportFragment frag;
        frag.method = canonical_method(method);
        frag.data_mode = data_mode;
        frag.pair = dr.pair;
        frag.arch = c.spec.arch;
        frag.kshot = dr.kshot;
        frag.seed = c.seed;
        frag.num_classes = c.spec.num_classes;
        frag.accuracy = 100.0 * acc;
        frag.val_accuracy = 100.0 * c.val_accuracy;
        frag.argv = with_cmd("eval", args);
        append_fragment(report_path, frag);
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& args) {
    CLI::App app{"Aggregate report fragments into a table"};
    std::vector<std::string> inputs;
    std::string out = "experiment_report.jsonl";
    app.add_option("inputs", inputs, "fragment files (JSON lines)")->required()->expected(-1);
    app.add_option("--out", out, "machine-readable output file");
    parse_args(app, args, "report");

    std::vector<ReportFragment> frags;
    for (const std::string& in : inputs) {
        std::vector<ReportFragment> part = read_fragments(in);
        frags.insert(frags.end(), part.begin(), part.end());
    }
    if (frags.empty()) throw DataError("report: no fragments in the given files");
    std::vector<ExperimentReport> rows = aggregate_fragments(frags);
    std::cout << render_table(rows);
    write_report_jsonl(out, rows);

    fs::path meta_path(out);
    meta_path.replace_extension(".meta.json");
    json meta;
    meta["argv"] = with_cmd("report", args);
    meta["inputs"] = inputs;
    std::ofstream mf(meta_path, std::ios::binary);
    if (!mf) throw DataError("cannot write " + meta_path.string());
    mf << meta.dump(2) << "\n";
    return 0;
}

int run(const std::vector<std::string>& args) {
    static const char* usage =
        "usage: rotadapt <command> [options]\n"
        "commands:\n"
        "  build-data   emit a dataset root (synthetic pair or folder ingestion)\n"
        "  train        stage-1 training (supervised + self-supervised)\n"
        "  distill      stage-2 self-distillation from teacher checkpoint(s)\n"
        "  eval         evaluate a checkpoint on a labeled split\n"
        "  report       aggregate run fragments into a table\n"
        "run '<command> --help' for options.\n";
    if (args.empty()) {
        std::cerr << usage;
        return 2;
    }
    const std::string cmd = args[0];
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    try {
        if (cmd == "build-data") return cmd_build_data(rest);
        if (cmd == "train") return cmd_train(rest);
        if (cmd == "distill") return cmd_distill(rest);
        if (cmd == "eval") return cmd_eval(rest);
        if (cmd == "report") return cmd_report(rest);
        if (cmd == "--help" || cmd == "-h" || cmd == "help") {
            std::cout << usage;
            return 0;
        }
        std::cerr << "unknown command: " << cmd << "\n" << usage;
        return 2;
    } catch (const CLI::CallForHelp&) {
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace rotadapt::cli
