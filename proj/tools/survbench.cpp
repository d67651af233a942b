#include <iostream>

#include "survbench/cli.hpp"

int main(int argc, char** argv) { return survbench::run_cli(argc, argv, std::cout, std::cerr); }
