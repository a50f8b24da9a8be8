#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rotadapt/rng.hpp"
#include "rotadapt/types.hpp"

namespace rotadapt {

// `relative/path<space>label` per line; label -1 (or an omitted column) marks
// an unlabeled entry. Single ASCII space, LF endings, paths unique.
struct SplitLine {
    std::string path;
    int label = -1;
};
std::vector<SplitLine> read_split_file(const std::filesystem::path& path);
void write_split_file(const std::filesystem::path& path, const std::vector<SplitLine>& lines);

// Loads every split entry from `<root>/<relative path>`, center-crops to
// square and resizes to image_size. Ids are the relative paths.
Pool load_domain_folder(const std::filesystem::path& root,
                        const std::filesystem::path& split_file, int image_size,
                        Domain domain);

struct KShotOptions {
    int k = 3;
    int val_per_class = 3;
    double test_fraction = 0.2;  // carved first, disjoint from everything
    // MME-compatible overlap mode: no carve; the non-labeled non-val remainder
    // is both the test pool (labels kept) and the unlabeled pool (stripped).
    bool mme_overlap = false;
};

// Returns a split with labeled_target/val_target/unlabeled_target/test_target
// filled (labeled_source left empty). The unlabeled pool is every non-test,
// non-val target image with labels stripped — including the k shots.
DatasetSplit build_kshot_split(const Pool& target, const KShotOptions& opts, Rng& rng);

// Union with all labels stripped. Distractor labels, when present, must lie
// outside [0, num_classes).
Pool build_uncurated_pool(const Pool& curated, const Pool& distractors, int num_classes);

}  // namespace rotadapt
