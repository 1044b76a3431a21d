#include "memgeom/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return memgeom::run_cli(argc, argv, std::cout, std::cerr); }
