#include "modemfuse/cli.hpp"

int main(int argc, char** argv) { return modemfuse::cli_main(argc, argv); }
