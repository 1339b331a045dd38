#include "reflectrag/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return reflectrag::run_cli(argc, argv, std::cout, std::cerr);
}
