#pragma once

#include <string>
#include <vector>

#include "rotadapt/rng.hpp"
#include "rotadapt/types.hpp"

namespace rotadapt {

// Procedural two-domain glyph dataset. Both domains draw the same upright
// stroke glyphs (so rotation prediction is well-posed) but differ in
// rendering style: the source fills its strokes dark on a light smooth
// gradient; the target draws bright stroke outlines on a mid-gray sinusoidal
// texture. Distractor classes exist only in target style.
struct SyntheticSpec {
    int num_classes = 8;       // first `num_classes` glyphs of the table
    int num_distractors = 4;   // glyphs after the class range
    int image_size = 32;
    int source_per_class = 40;
    int source_test_per_class = 10;
    int target_per_class = 40;
    int distractor_per_class = 40;
    double orientation_noise_deg = 15.0;
    uint64_t seed = 1;
    void validate() const;
};

struct SyntheticPair {
    Pool source_train;  // labeled, source style
    Pool source_test;   // labeled held-out source slice (for domain-gap probes)
    Pool target;        // labeled, target style; split downstream
    Pool distractors;   // labeled with ids >= num_classes, target style
};

SyntheticPair generate_synthetic_pair(const SyntheticSpec& spec);

// Glyph table (8 class glyphs + 4 distractor glyphs), canonical names.
const std::vector<std::string>& glyph_names();

// Canonical upright ink mask of a glyph (1 = ink), default pose, no jitter.
Image glyph_template(int glyph, int size);

}  // namespace rotadapt
