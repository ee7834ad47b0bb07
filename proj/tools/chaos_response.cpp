#include "chaos/harness/cli.hpp"

int main(int argc, char** argv) { return chaos::harness::cli_main(argc, argv); }
