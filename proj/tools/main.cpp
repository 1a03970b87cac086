#include "emowatch/cli.hpp"

int main(int argc, char** argv) { return emowatch::cli::run(argc, argv); }
