#include "nhim/cli.hpp"

int main(int argc, char** argv) { return nhim::cli::run(argc, argv); }
