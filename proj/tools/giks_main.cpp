#include "giks/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return giks::cli::run(argc, argv, std::cout, std::cerr); }
