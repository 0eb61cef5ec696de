#include <iostream>

#include "rbl/cli.hpp"

int main(int argc, char** argv) { return rbl::run_cli(argc, argv, std::cout, std::cerr); }
