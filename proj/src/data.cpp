#include "rotadapt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rotadapt/errors.hpp"
#include "rotadapt/image_io.hpp"

namespace rotadapt {

std::vector<SplitLine> read_split_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read split file " + path.string());
    std::vector<SplitLine> out;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        SplitLine sl;
        if (!(ls >> sl.path))
            throw DataError("split file " + path.string() + ": malformed line " +
                            std::to_string(lineno));
        std::string rest;
        if (ls >> rest) {
            try {
                size_t pos = 0;
                sl.label = std::stoi(rest, &pos);
                if (pos != rest.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw DataError("split file " + path.string() + ": bad label on line " +
                                std::to_string(lineno));
            }
            if (sl.label < -1)
                throw DataError("split file " + path.string() + ": label < -1 on line " +
                                std::to_string(lineno));
        }
        std::string extra;
        if (ls >> extra)
            throw DataError("split file " + path.string() + ": trailing tokens on line " +
                            std::to_string(lineno));
        if (!seen.insert(sl.path).second)
            throw DataError("split file " + path.string() + ": duplicate path '" + sl.path +
                            "'");
        out.push_back(std::move(sl));
    }
    return out;
}

void write_split_file(const std::filesystem::path& path,
                      const std::vector<SplitLine>& lines) {
    std::set<std::string> seen;
    for (const auto& sl : lines)
        if (!seen.insert(sl.path).second)
            throw InputError("split file: duplicate path '" + sl.path + "'");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write split file " + path.string());
    for (const auto& sl : lines) f << sl.path << ' ' << sl.label << '\n';
    if (!f) throw DataError("failed writing split file " + path.string());
}

Pool load_domain_folder(const std::filesystem::path& root,
                        const std::filesystem::path& split_file, int image_size,
                        Domain domain) {
    if (image_size < 1) throw InputError("load_domain_folder: bad image size");
    const std::vector<SplitLine> lines = read_split_file(split_file);

    std::vector<std::string> missing;
    for (const auto& sl : lines)
        if (!std::filesystem::exists(root / sl.path)) missing.push_back(sl.path);
    if (!missing.empty()) {
        std::string msg = "missing image files under " + root.string() + ":";
        for (const auto& m : missing) msg += "\n  " + m;
        throw DataError(msg);
    }

    Pool pool;
    pool.reserve(lines.size());
    for (const auto& sl : lines) {
        Example ex;
        ex.image = resize_bilinear(center_crop_square(read_ppm(root / sl.path)), image_size,
                                   image_size);
        if (sl.label >= 0) ex.label = sl.label;
        ex.domain = domain;
        ex.id = sl.path;
        pool.push_back(std::move(ex));
    }
    return pool;
}

DatasetSplit build_kshot_split(const Pool& target, const KShotOptions& opts, Rng& rng) {
    if (opts.k < 1) throw InputError("build_kshot_split: k must be >= 1");
    if (opts.val_per_class < 0) throw InputError("build_kshot_split: val_per_class < 0");
    if (opts.test_fraction < 0.0 || opts.test_fraction >= 1.0)
        throw InputError("build_kshot_split: test_fraction must be in [0,1)");
    if (target.empty()) throw InputError("build_kshot_split: empty target pool");

    std::map<int, std::vector<int>> by_class;  // label -> indices in pool order
    for (size_t i = 0; i < target.size(); ++i) {
        const Example& ex = target[i];
        if (!ex.label)
            throw InputError("build_kshot_split: unlabeled example '" + ex.id + "'");
        by_class[*ex.label].push_back(static_cast<int>(i));
    }

    for (const auto& [label, idx] : by_class)
        if (static_cast<int>(idx.size()) < opts.k + opts.val_per_class + 1)
            throw DataError("class " + std::to_string(label) + " has only " +
                            std::to_string(idx.size()) + " examples; need at least " +
                            std::to_string(opts.k + opts.val_per_class + 1));

    DatasetSplit split;
    auto strip = [](Example ex) {
        ex.label.reset();
        return ex;
    };

    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        size_t test_count = 0;
        if (!opts.mme_overlap)
            test_count = static_cast<size_t>(
                std::llround(opts.test_fraction * static_cast<double>(idx.size())));
        const size_t rest = idx.size() - test_count;
        if (rest < static_cast<size_t>(opts.k + opts.val_per_class))
            throw DataError("class " + std::to_string(label) + ": only " +
                            std::to_string(rest) + " examples remain after the test carve; "
                            "need k + val_per_class = " +
                            std::to_string(opts.k + opts.val_per_class));

        size_t p = 0;
        for (; p < test_count; ++p) split.test_target.push_back(target[idx[p]]);
        const size_t k_end = p + opts.k;
        const size_t val_end = k_end + opts.val_per_class;
        for (; p < k_end; ++p) {
            split.labeled_target.push_back(target[idx[p]]);
            split.unlabeled_target.push_back(strip(target[idx[p]]));
        }
        for (; p < val_end; ++p) split.val_target.push_back(target[idx[p]]);
        for (; p < idx.size(); ++p) {
            if (opts.mme_overlap) split.test_target.push_back(target[idx[p]]);
            split.unlabeled_target.push_back(strip(target[idx[p]]));
        }
    }
    return split;
}

Pool build_uncurated_pool(const Pool& curated, const Pool& distractors, int num_classes) {
    if (num_classes < 1) throw InputError("build_uncurated_pool: bad num_classes");
    for (const Example& ex : distractors)
        if (ex.label && *ex.label >= 0 && *ex.label < num_classes)
            throw InputError("build_uncurated_pool: distractor '" + ex.id +
                             "' carries an in-range class label " +
                             std::to_string(*ex.label));

    std::set<std::string> ids;
    Pool out;
    out.reserve(curated.size() + distractors.size());
    auto add = [&](Example ex) {
        if (!ids.insert(ex.id).second)
            throw DataError("build_uncurated_pool: id collision on '" + ex.id + "'");
        ex.label.reset();
        out.push_back(std::move(ex));
    };
    for (const Example& ex : curated) add(ex);
    for (const Example& ex : distractors) add(ex);
    return out;
}

}  // namespace rotadapt
