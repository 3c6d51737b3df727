#include "avq/cli/commands.hpp"

int main(int argc, char** argv) { return avq::run_cli(argc, argv); }
