#include "rotadapt/pretext.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "rotadapt/errors.hpp"

namespace rotadapt {

Tensor rotate_image(const Tensor& image, int angle_index) {
    if (angle_index < 0 || angle_index > 3)
        throw InputError("rotate_image: angle index must be in {0,1,2,3}");
    if (image.h != image.w)
        throw InputError("rotate_image: image must be square, got " +
                         std::to_string(image.h) + "x" + std::to_string(image.w));
    if (angle_index == 0) return image;

    const int s = image.h;
    Tensor out(image.n, image.c, s, s);
    for (int i = 0; i < image.n; ++i)
        for (int c = 0; c < image.c; ++c) {
            const double* src =
                image.v.data() + (static_cast<size_t>(i) * image.c + c) * s * s;
            double* dst = out.v.data() + (static_cast<size_t>(i) * image.c + c) * s * s;
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    double v;
                    switch (angle_index) {
                        case 1: v = src[static_cast<size_t>(x) * s + (s - 1 - y)]; break;
                        case 2: v = src[static_cast<size_t>(s - 1 - y) * s + (s - 1 - x)]; break;
                        default: v = src[static_cast<size_t>(s - 1 - x) * s + y]; break;
                    }
                    dst[static_cast<size_t>(y) * s + x] = v;
                }
        }
    return out;
}

Tensor rotate_batch(const Tensor& batch, const std::vector<int>& angle_index) {
    if (static_cast<size_t>(batch.n) != angle_index.size())
        throw InputError("rotate_batch: one angle per image required");
    Tensor out = batch;
    for (int i = 0; i < batch.n; ++i) {
        Tensor rotated = rotate_image(batch.slice(i), angle_index[i]);
        std::copy(rotated.v.begin(), rotated.v.end(),
                  out.v.begin() + static_cast<size_t>(i) * batch.per_image());
    }
    return out;
}

RotationBatch make_rotation_batch(const Tensor& batch, Rng& rng) {
    if (batch.n < 1) throw InputError("make_rotation_batch: empty batch");
    RotationBatch out;
    out.labels.resize(batch.n);
    for (int i = 0; i < batch.n; ++i) out.labels[i] = static_cast<int>(rng.uniform_int(4));
    out.x = rotate_batch(batch, out.labels);
    return out;
}

int hamming(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw InputError("hamming: length mismatch");
    int d = 0;
    for (size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

namespace {

// (grid^2)! saturated so the p <= n! precondition check cannot overflow.
uint64_t saturating_factorial(int n) {
    uint64_t f = 1;
    for (int i = 2; i <= n; ++i) {
        if (f > UINT64_MAX / static_cast<uint64_t>(i)) return UINT64_MAX;
        f *= static_cast<uint64_t>(i);
    }
    return f;
}

}  // namespace

JigsawPermutationSet build_jigsaw_permutations(int p, int grid, Rng& rng, int candidates) {
    if (grid < 1) throw InputError("build_jigsaw_permutations: grid must be >= 1");
    if (candidates < 1) throw InputError("build_jigsaw_permutations: candidates must be >= 1");
    const int n = grid * grid;
    if (p < 1 || static_cast<uint64_t>(p) > saturating_factorial(n))
        throw InputError("build_jigsaw_permutations: need 1 <= P <= (grid^2)!");

    JigsawPermutationSet out;
    out.grid = grid;
    std::vector<int> identity(n);
    std::iota(identity.begin(), identity.end(), 0);
    out.perms.push_back(identity);
    std::set<std::vector<int>> chosen{identity};

    while (static_cast<int>(out.perms.size()) < p) {
        std::vector<int> best;
        int best_min = -1;
        for (int c = 0; c < candidates; ++c) {
            std::vector<int> cand = identity;
            rng.shuffle(cand);
            if (chosen.count(cand)) continue;
            int min_d = n + 1;
            for (const auto& q : out.perms) min_d = std::min(min_d, hamming(cand, q));
            if (min_d > best_min) {
                best_min = min_d;
                best = cand;
            }
        }
        if (best.empty()) {
            // All candidates were duplicates; for small tile counts pick the
            // first unused permutation in lexicographic order.
            if (n > 8)
                throw InputError("build_jigsaw_permutations: sampling failed to find a "
                                 "fresh permutation");
            std::vector<int> cand = identity;
            do {
                if (!chosen.count(cand)) {
                    best = cand;
                    break;
                }
            } while (std::next_permutation(cand.begin(), cand.end()));
            if (best.empty())
                throw InputError("build_jigsaw_permutations: permutation space exhausted");
        }
        out.perms.push_back(best);
        chosen.insert(best);
    }
    return out;
}

Tensor permute_tiles(const Tensor& image, const std::vector<int>& perm, int grid) {
    if (grid < 1 || static_cast<int>(perm.size()) != grid * grid)
        throw InputError("permute_tiles: permutation length must be grid^2");
    if (image.h % grid != 0 || image.w % grid != 0)
        throw InputError("permute_tiles: image dims " + std::to_string(image.h) + "x" +
                         std::to_string(image.w) + " not divisible by grid " +
                         std::to_string(grid));
    const int th = image.h / grid, tw = image.w / grid;
    Tensor out = image;
    for (int slot = 0; slot < grid * grid; ++slot) {
        const int src_tile = perm[slot];
        const int sy = (src_tile / grid) * th, sx = (src_tile % grid) * tw;
        const int dy = (slot / grid) * th, dx = (slot % grid) * tw;
        for (int i = 0; i < image.n; ++i)
            for (int c = 0; c < image.c; ++c)
                for (int y = 0; y < th; ++y) {
                    const double* src = &image.at(i, c, sy + y, sx);
                    double* dst = &out.at(i, c, dy + y, dx);
                    std::copy(src, src + tw, dst);
                }
    }
    return out;
}

JigsawBatch make_jigsaw_batch(const Tensor& batch, const JigsawPermutationSet& perms,
                              Rng& rng) {
    if (batch.n < 1) throw InputError("make_jigsaw_batch: empty batch");
    if (perms.perms.empty()) throw InputError("make_jigsaw_batch: empty permutation set");
    JigsawBatch out;
    out.x = batch;
    out.labels.resize(batch.n);
    for (int i = 0; i < batch.n; ++i) {
        const int label = static_cast<int>(rng.uniform_int(perms.size()));
        out.labels[i] = label;
        Tensor shuffled = permute_tiles(batch.slice(i), perms.perms[label], perms.grid);
        std::copy(shuffled.v.begin(), shuffled.v.end(),
                  out.x.v.begin() + static_cast<size_t>(i) * batch.per_image());
    }
    return out;
}

void save_permutations(const std::filesystem::path& path, const JigsawPermutationSet& s) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write permutation set " + path.string());
    for (const auto& perm : s.perms) {
        for (size_t i = 0; i < perm.size(); ++i) {
            if (i) f << ' ';
            f << perm[i];
        }
        f << '\n';
    }
}

JigsawPermutationSet load_permutations(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read permutation set " + path.string());
    JigsawPermutationSet s;
    std::string line;
    std::set<std::vector<int>> seen;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<int> perm;
        int v;
        while (ls >> v) perm.push_back(v);
        s.perms.push_back(std::move(perm));
    }
    if (s.perms.empty()) throw DataError("permutation set " + path.string() + " is empty");
    const size_t n = s.perms[0].size();
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (static_cast<size_t>(grid) * grid != n)
        throw DataError("permutation set " + path.string() + ": length is not a square");
    s.grid = grid;
    for (const auto& perm : s.perms) {
        if (perm.size() != n)
            throw DataError("permutation set " + path.string() + ": ragged lines");
        std::vector<int> sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < n; ++i)
            if (sorted[i] != static_cast<int>(i))
                throw DataError("permutation set " + path.string() + ": not a permutation");
        if (!seen.insert(perm).second)
            throw DataError("permutation set " + path.string() + ": duplicate permutation");
    }
    for (size_t i = 0; i < n; ++i)
        if (s.perms[0][i] != static_cast<int>(i))
            throw DataError("permutation set " + path.string() + ": line 0 must be identity");
    return s;
}

}  // namespace rotadapt
