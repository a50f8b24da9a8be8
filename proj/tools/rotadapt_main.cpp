#include <string>
#include <vector>

#include "rotadapt/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rotadapt::cli::run(args);
}
