#include "netchemo/cli.hpp"

int main(int argc, char** argv) { return netchemo::cli::run(argc, argv); }
