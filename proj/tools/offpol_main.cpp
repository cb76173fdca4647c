#include "offpol/cli.hpp"

int main(int argc, char** argv) { return offpol::cli_main(argc, argv); }
