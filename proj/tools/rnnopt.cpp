#include <iostream>

#include "rnnopt/cli.hpp"

int main(int argc, char** argv) { return rnnopt::run_cli(argc, argv, std::cout, std::cerr); }
