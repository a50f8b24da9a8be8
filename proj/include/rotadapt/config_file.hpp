#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rotadapt/types.hpp"

namespace rotadapt {

uint64_t fnv1a64(const void* data, size_t len);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Flat key=value document; one pair per line, '#' starts a comment.
// Keys match TrainConfig fields (lambda_s, ..., vat_epsilon, vat_xi,
// vat_power_iterations, jigsaw_grid, jigsaw_perm_count). Unknown keys are
// rejected.
std::string serialize_config(const TrainConfig& cfg);
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value);

}  // namespace rotadapt
