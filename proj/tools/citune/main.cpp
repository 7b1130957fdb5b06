#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return citune::cli::run_command(argc, argv, std::cout, std::cerr); }
