#include "lpvdpc/bench.hpp"

#include <iostream>

int main(int argc, char** argv) { return lpvdpc::bench::run_cli(argc, argv, std::cout, std::cerr); }
