#include "cli.hpp"

int main(int argc, char** argv) { return repmetric::cli::run(argc, argv); }
