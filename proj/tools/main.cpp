#include "cli.hpp"

int main(int argc, char** argv) { return vf::cli::run(argc, argv); }
