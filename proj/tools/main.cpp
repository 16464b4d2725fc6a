#include "maxent/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return maxent::run_cli(argc, argv, std::cout, std::cerr); }
