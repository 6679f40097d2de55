#include <iostream>

#include "xenav/cli.hpp"

int main(int argc, char** argv) { return xenav::run_cli(argc, argv, std::cout, std::cerr); }
