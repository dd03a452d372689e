#include "kedrl/cli.hpp"

int main(int argc, char** argv) { return kedrl::run_cli(argc, argv); }
