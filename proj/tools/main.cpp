#include "cli.hpp"

int main(int argc, char** argv) { return resgrad::cli::run_cli(argc, argv); }
