#include "visrank/cli.hpp"

int main(int argc, char** argv) { return visrank::cli::run(argc, argv); }
