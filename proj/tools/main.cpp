#include "cli/cli.hpp"

int main(int argc, char** argv) { return pipgan::cli::run(argc, argv); }
