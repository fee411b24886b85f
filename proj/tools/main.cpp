#include "cli.hpp"

int main(int argc, char** argv) { return voxelflow::cli::cli_main(argc, argv); }
