#include <iostream>

#include "svt/cli.hpp"

int main(int argc, char** argv) {
    return svt::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
