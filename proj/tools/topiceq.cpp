#include <iostream>

#include "topiceq/cli.hpp"

int main(int argc, char** argv) { return topiceq::cli::dispatch(argc, argv, std::cout, std::cerr); }
