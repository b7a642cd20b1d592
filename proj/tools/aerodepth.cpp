#include "aerodepth/cli.hpp"

int main(int argc, char** argv) { return aerodepth::cli::run(argc, argv); }
