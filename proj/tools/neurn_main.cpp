#include "neurn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return neurn::cli::dispatch(argc, argv, std::cout, std::cerr); }
