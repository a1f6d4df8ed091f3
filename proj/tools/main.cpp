#include "nzlab/experiments.hpp"

int main(int argc, char** argv) { return nzlab::run_cli(argc, argv); }
