#include "probeforce/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return probeforce::cli::main(argc, argv, std::cout, std::cerr); }
