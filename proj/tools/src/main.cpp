#include "curvreg_cli/cli.hpp"

int main(int argc, char** argv) { return curvreg_cli::cli_main(argc, argv); }
