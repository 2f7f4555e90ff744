#include <iostream>

#include "looptune/cli.hpp"

int main(int argc, char** argv) { return looptune::run_cli(argc, argv, std::cout, std::cerr); }
