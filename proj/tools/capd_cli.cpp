#include "capd/cli.hpp"

int main(int argc, char** argv) { return capd::cli::run(argc, argv); }
