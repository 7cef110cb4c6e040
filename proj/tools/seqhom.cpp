#include "seqhom/cli_runner.hpp"

int main(int argc, char** argv) { return seqhom::cli_main(argc, argv); }
