#include <iostream>

#include "hyperbrain/cli.hpp"

int main(int argc, char** argv) { return hyperbrain::cli::run(argc, argv, std::cout, std::cerr); }
