#include <iostream>
#include <string>
#include <vector>

#include "hoig/workbench/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hoig::cli_dispatch(std::move(args), std::cout, std::cerr);
}
