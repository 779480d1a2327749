#include "multissl/runner/cli.hpp"

int main(int argc, char** argv) { return multissl::runner::run_cli(argc, argv); }
