#include "htopt/harness.hpp"

int main(int argc, char** argv) { return htopt::cli_main(argc, argv); }
