#include <iostream>

#include "fewatom/cli.hpp"

int main(int argc, char** argv) { return fewatom::cli_main(argc, argv, std::cout, std::cerr); }
