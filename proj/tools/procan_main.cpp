#include <iostream>

#include "procan/cli.hpp"

int main(int argc, char** argv) { return procan::run_cli(argc, argv, std::cout, std::cerr); }
