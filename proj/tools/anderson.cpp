#include "anderson/harness/cli.hpp"

int main(int argc, char** argv) { return anderson::harness::cli_main(argc, argv); }
