#include <iostream>

#include "bmcond/cli.hpp"

int main(int argc, char** argv) { return bmcond::cli::run_cli(argc, argv, std::cout, std::cerr); }
