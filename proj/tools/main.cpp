#include "pips_cli.hpp"

int main(int argc, char** argv) { return pips::cli::run_cli(argc, argv, std::cout, std::cerr); }
