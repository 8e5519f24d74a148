#include <iostream>

#include "sseval/cli.hpp"

int main(int argc, char** argv) { return sseval::cli::run_cli(argc, argv, std::cout, std::cerr); }
