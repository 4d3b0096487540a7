#include "cli.hpp"

int main(int argc, char** argv) { return csflow::cli::run(argc, argv); }
