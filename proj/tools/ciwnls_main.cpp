#include "ciwnls/cli.hpp"

int main(int argc, char** argv) { return ciwnls::run_cli(argc, argv); }
