#include <iostream>

#include "ssiv/cli.hpp"

int main(int argc, char** argv) { return ssiv::cli::run(argc, argv, std::cout, std::cerr); }
