#include <iostream>

#include "quadfit/cli.hpp"

int main(int argc, char** argv) { return quadfit::cli_main(argc, argv, std::cout, std::cerr); }
