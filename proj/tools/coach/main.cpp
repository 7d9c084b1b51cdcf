#include <iostream>

#include "coach/cli/cli.hpp"

int main(int argc, char** argv) { return coach::cli::run(argc, argv, std::cout, std::cerr); }
