#include <iostream>
#include <string>
#include <vector>

#include "acekit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return acekit::run_cli(args, std::cout, std::cerr);
}
