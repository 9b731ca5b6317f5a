#include "cli.hpp"

int main(int argc, char** argv) { return pairrank::cli::run_cli(argc, argv); }
