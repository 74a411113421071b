#include "cli.hpp"

int main(int argc, char** argv) { return cisac::cli::run(argc, argv); }
