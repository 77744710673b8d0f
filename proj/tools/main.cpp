#include <iostream>

#include "coep/cli/commands.hpp"

int main(int argc, char** argv) { return coep::run_cli(argc, argv, std::cout, std::cerr); }
