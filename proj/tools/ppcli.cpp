#include <iostream>

#include "popproto/cli.hpp"

int main(int argc, char** argv) { return popproto::cli::run_cli(argc, argv, std::cout, std::cerr); }
