#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rotadapt/model.hpp"

namespace rotadapt {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelSpec spec;
    std::vector<double> weights;
    int iteration = 0;
    double val_accuracy = 0.0;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    uint32_t version = kCheckpointVersion;

    Model to_model() const;
    static Checkpoint of_model(const Model& m, int iteration, double val_accuracy,
                               uint64_t seed, uint64_t config_hash);
};

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Writes `<path>` (binary weights, versioned, CRC-checksummed) and
// `<path minus .ckpt>.meta.json`. `path` must end in ".ckpt".
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rotadapt
