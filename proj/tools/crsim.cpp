#include "crsim/cli.hpp"

int main(int argc, char** argv) { return crsim::run_cli(argc, argv); }
