#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return gridse::cli::run(argc, argv, std::cout, std::cerr); }
