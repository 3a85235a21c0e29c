#include "ufv/cli.hpp"

int main(int argc, char** argv) { return ufv::cli::run_cli(argc, argv); }
