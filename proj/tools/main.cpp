#include "reachtrack/cli.hpp"

int main(int argc, char** argv) { return reachtrack::cli(argc, argv); }
