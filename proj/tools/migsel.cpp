#include "mig/cli.hpp"

int main(int argc, char** argv) { return mig::cli::run_cli(argc, argv); }
