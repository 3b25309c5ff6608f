#include <iostream>

#include "mbbn/cli/cli.hpp"

int main(int argc, char** argv) { return mbbn::cli::run(argc, argv, std::cout, std::cerr); }
