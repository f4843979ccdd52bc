#include "scam/cli.hpp"

int main(int argc, char** argv) { return scam::cli_main(argc, argv); }
