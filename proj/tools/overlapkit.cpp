#include "overlapkit/cli.hpp"

int main(int argc, char** argv) { return overlapkit::run_cli(argc, argv); }
