#include "celltrack/cli.hpp"

int main(int argc, char** argv) { return celltrack::cli::run_cli(argc, argv); }
