#include <iostream>

#include "neutrosim/cli.hpp"

int main(int argc, char** argv) { return neutrosim::cli::dispatch(argc, argv, std::cout, std::cerr); }
