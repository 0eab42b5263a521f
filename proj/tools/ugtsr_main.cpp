#include "ugtsr/cli.hpp"

int main(int argc, char** argv) { return ugtsr::cli_main(argc, argv); }
