#include <iostream>

#include "stfv/experiments.hpp"

int main(int argc, char** argv) { return stfv::cli_main(argc, argv, std::cout, std::cerr); }
