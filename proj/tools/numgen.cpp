#include <string>
#include <vector>

#include "numgen/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return numgen::run_cli(args);
}
