#include <iostream>
#include <string>
#include <vector>

#include "multivariance/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return multivariance::cli::run(std::move(args), std::cout, std::cerr);
}
