#include <iostream>

#include "factorial/cli.hpp"

int main(int argc, char** argv) { return factorial::run_cli(argc, argv, std::cout, std::cerr); }
