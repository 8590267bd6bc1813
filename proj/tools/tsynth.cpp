#include "tsynth/cli.hpp"

int main(int argc, char** argv) { return tsynth::cli::run(argc, argv); }
