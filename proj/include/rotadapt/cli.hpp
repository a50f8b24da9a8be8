#pragma once

#include <string>
#include <vector>

#include "rotadapt/types.hpp"

namespace rotadapt::cli {

// Uppercases and validates a method tag; accepts S+T, ROT, ROT+ENT, ROT+VAT,
// ROT+ENT+VAT, JIG+ENT and KD(<one of those>). Unknown tags are rejected.
std::string canonical_method(const std::string& method);

// Sets pretext kind and the lambda pattern a canonical (non-KD) tag implies.
// lambda_ent defaults to 0.01 (0.1 for the large arch, which tolerates a
// stronger entropy term); lambda_vat defaults to 0.01.
void apply_method(const std::string& canonical, const std::string& arch, TrainConfig& cfg);

// Subcommand entry points. Args exclude the subcommand name. All return 0 on
// success and throw the library error types on failure.
int cmd_build_data(const std::vector<std::string>& args);
int cmd_train(const std::vector<std::string>& args);
int cmd_distill(const std::vector<std::string>& args);
int cmd_eval(const std::vector<std::string>& args);
int cmd_report(const std::vector<std::string>& args);

// Dispatches argv (minus the program name) and maps exceptions to exit codes:
// 0 success, 2 configuration/usage error, 3 data error, 4 numeric fault.
int run(const std::vector<std::string>& args);

}  // namespace rotadapt::cli
