#include "pnmf/cli.hpp"

int main(int argc, char** argv) { return pnmf::cli_main(argc, argv); }
