#include "sarscan/cli.hpp"

int main(int argc, char** argv) { return sarscan::cli::run(argc, argv); }
