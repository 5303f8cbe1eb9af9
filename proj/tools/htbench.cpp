#include "htbench/cli.hpp"

int main(int argc, char** argv) { return htbench::cli_dispatch(argc, argv); }
