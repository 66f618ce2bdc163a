#include <iostream>

#include "etdp/cli.hpp"

int main(int argc, char** argv) {
    return etdp::cli::run_main(argc, argv, std::cout, std::cerr);
}
