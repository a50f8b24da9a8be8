#pragma once

#include <filesystem>
#include <vector>

#include "rotadapt/rng.hpp"
#include "rotadapt/tensor.hpp"

namespace rotadapt {

// Rotation index k means k * 90 degrees counter-clockwise:
// index 1 maps out[i][j] = in[j][W-1-i].
Tensor rotate_image(const Tensor& image, int angle_index);
// Rotates image i of the batch by angle_index[i].
Tensor rotate_batch(const Tensor& batch, const std::vector<int>& angle_index);

struct RotationBatch {
    Tensor x;
    std::vector<int> labels;  // in {0,1,2,3}
};
// Uniform i.i.d. angle per image, drawn from rng.
RotationBatch make_rotation_batch(const Tensor& batch, Rng& rng);

struct JigsawPermutationSet {
    int grid = 3;
    std::vector<std::vector<int>> perms;  // perms[0] is identity
    int size() const { return static_cast<int>(perms.size()); }
};

// Greedy maximal-minimum-Hamming-distance selection: start from identity,
// then repeatedly keep the best of `candidates` random permutations.
JigsawPermutationSet build_jigsaw_permutations(int p, int grid, Rng& rng,
                                               int candidates = 1000);

int hamming(const std::vector<int>& a, const std::vector<int>& b);

struct JigsawBatch {
    Tensor x;
    std::vector<int> labels;  // permutation index
};
// Cuts each image into grid^2 tiles and reorders them by a uniformly sampled
// permutation; output tile at slot i is input tile perm[i].
JigsawBatch make_jigsaw_batch(const Tensor& batch, const JigsawPermutationSet& perms,
                              Rng& rng);
Tensor permute_tiles(const Tensor& image, const std::vector<int>& perm, int grid);

// One permutation per line, space-separated indices; line 0 is identity.
void save_permutations(const std::filesystem::path& path, const JigsawPermutationSet& s);
JigsawPermutationSet load_permutations(const std::filesystem::path& path);

}  // namespace rotadapt
