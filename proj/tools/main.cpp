#include <iostream>

#include "permsig/cli.hpp"

int main(int argc, char** argv) { return permsig::run_cli(argc, argv, std::cout, std::cerr); }
